#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ddl/classify.hpp"
#include "ddl/data_io.hpp"
#include "ddl/model_io.hpp"
#include "test_helpers.hpp"

using namespace ddl;
using namespace ddl::testing;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

LabeledDataset planted(std::uint64_t seed) {
  SynthSpec spec;
  spec.classes = 2;
  spec.dim = 10;
  spec.atoms_per_class = 2;
  spec.samples_per_class = 8;
  spec.sparsity = 2;
  spec.noise_sigma = 0.01;
  spec.seed = seed;
  return synth_planted(spec).dataset;
}

void expect_same_predictions(const TrainedModel& a, const TrainedModel& b,
                             const LabeledDataset& queries) {
  for (Index n = 0; n < queries.size(); ++n) {
    const auto ra = classify_model(a, queries.signals.col(n));
    const auto rb = classify_model(b, queries.signals.col(n));
    CHECK(ra.predicted_class == rb.predicted_class);
    CHECK((ra.scores - rb.scores).norm() == 0.0);
  }
}

} // namespace

TEST_SUITE_BEGIN("model_io");

TEST_CASE("track-one model round trip") {
  const LabeledDataset data = planted(3);
  MethodConfig cfg;
  cfg.method = Method::dlsi;
  cfg.atoms_per_class = 2;
  cfg.eta = 0.5;
  cfg.lambda = 0.05;
  cfg.schedule.max_outer_iterations = 5;
  const TrainedModel model = train_dlsi(data, cfg);

  TempFile file("ddl_model_dlsi.txt");
  save_model(model, file.path);
  const TrainedModel back = load_model(file.path);

  CHECK(back.method == Method::dlsi);
  CHECK(back.resolved == Method::dlsi);
  CHECK(back.num_classes == 2);
  CHECK(back.dictionary.atom_class == model.dictionary.atom_class);
  CHECK((back.dictionary.atoms - model.dictionary.atoms).norm() == 0.0);
  CHECK(back.config.lambda.value() == model.config.lambda.value());
  CHECK(back.config.eta.value() == model.config.eta.value());
  expect_same_predictions(model, back, data);
}

TEST_CASE("classifier model round trip preserves predictions") {
  const LabeledDataset data = planted(7);
  MethodConfig cfg;
  cfg.method = Method::lcksvd;
  cfg.atoms_per_class = 2;
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 1.0;
  cfg.lambda3 = 0.05;
  cfg.schedule.max_outer_iterations = 5;
  const TrainedModel model = train_lcksvd(data, cfg);

  TempFile file("ddl_model_lcksvd.txt");
  save_model(model, file.path);
  const TrainedModel back = load_model(file.path);
  REQUIRE(back.classifier.has_value());
  CHECK((back.classifier->linear.value() - model.classifier->linear.value()).norm() ==
        0.0);
  CHECK((back.classifier->code_transform.value() -
         model.classifier->code_transform.value())
            .norm() == 0.0);
  expect_same_predictions(model, back, data);
}

TEST_CASE("one-vs-all supervised model round trip") {
  const LabeledDataset data = planted(11);
  MethodConfig cfg;
  cfg.method = Method::supervised_dl;
  cfg.total_atoms = 4;
  cfg.lambda0 = 1.0;
  cfg.lambda1 = 0.05;
  cfg.lambda2 = 0.1;
  cfg.schedule.max_outer_iterations = 4;
  const TrainedModel model = train_supervised_multiclass(data, cfg);

  TempFile file("ddl_model_supervised.txt");
  save_model(model, file.path);
  const TrainedModel back = load_model(file.path);
  REQUIRE(back.submodels.size() == 2);
  CHECK(back.submodels[0].positive_class == 1);
  CHECK(back.submodels[1].positive_class == 2);
  CHECK((back.submodels[0].classifier->theta.value() -
         model.submodels[0].classifier->theta.value())
            .norm() == 0.0);
  expect_same_predictions(model, back, data);
}

TEST_CASE("version and format failures") {
  TempFile file("ddl_model_bad.txt");
  SUBCASE("wrong magic") {
    std::ofstream(file.path) << "not-a-model 1\nend\n";
    CHECK_THROWS_AS(load_model(file.path), DataError);
  }
  SUBCASE("wrong version") {
    std::ofstream(file.path) << "ddl-model 999\nend\n";
    try {
      load_model(file.path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_model("/no/such/model.txt"), DataError);
  }
  SUBCASE("truncated matrix") {
    std::ofstream(file.path) << "ddl-model 1\nmethod metaface\nclasses 1\n"
                             << "atom_class none\nmatrix D 3 2\n1 2\n";
    CHECK_THROWS_AS(load_model(file.path), DataError);
  }
}

TEST_CASE("trace csv") {
  TrainingTrace trace;
  trace.objective = {10.0, 5.5, 5.25};
  trace.reason = TrainingTrace::Termination::converged;
  TempFile file("ddl_trace.csv");
  save_trace_csv(trace, file.path);

  std::ifstream in(file.path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,objective");
  std::getline(in, line);
  CHECK(line == "0,10");
  std::getline(in, line);
  CHECK(line == "1,5.5");
  std::getline(in, line);
  CHECK(line == "2,5.25");
}

TEST_SUITE_END();
