#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ddl/data_io.hpp"
#include "ddl/model_io.hpp"

#ifndef DDL_CLI_PATH
#error "DDL_CLI_PATH must point at the built ddl binary"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "ddl_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_file = dir.file("cli_output.txt");
  const std::string command =
      std::string(DDL_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(command.c_str());
  std::ifstream in(out_file);
  std::stringstream buffer;
  buffer << in.rdbuf();
  int code = -1;
  if (WIFEXITED(status)) code = WEXITSTATUS(status);
  return {code, buffer.str()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen writes deterministic files and prints their paths") {
  TempDir dir;
  const std::string invocation = "gen --classes 3 --dim 20 --atoms 5 --samples 10 "
                                 "--test-samples 4 --seed 7 --out " +
                                 dir.file("a");
  const RunResult first = run_cli(invocation, dir);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("a_train.csv") != std::string::npos);
  CHECK(first.output.find("a_dict.txt") != std::string::npos);
  REQUIRE(fs::exists(dir.file("a_train.csv")));
  REQUIRE(fs::exists(dir.file("a_test.csv")));
  REQUIRE(fs::exists(dir.file("a_dict.txt")));

  const std::string again = "gen --classes 3 --dim 20 --atoms 5 --samples 10 "
                            "--test-samples 4 --seed 7 --out " +
                            dir.file("b");
  CHECK(run_cli(again, dir).exit_code == 0);
  CHECK(read_file(dir.file("a_train.csv")) == read_file(dir.file("b_train.csv")));
  CHECK(read_file(dir.file("a_test.csv")) == read_file(dir.file("b_test.csv")));
  CHECK(read_file(dir.file("a_dict.txt")) == read_file(dir.file("b_dict.txt")));

  const ddl::LabeledDataset train = ddl::load_csv(dir.file("a_train.csv"));
  CHECK(train.size() == 30);
  CHECK(train.num_classes == 3);
}

TEST_CASE("invalid flag values exit with the usage code") {
  TempDir dir;
  CHECK(run_cli("gen --classes 0 --out " + dir.file("x"), dir).exit_code == 2);
  CHECK(run_cli("nonsense-subcommand", dir).exit_code == 2);
  CHECK(run_cli("train --method metaface", dir).exit_code == 2);  // missing required
}

TEST_CASE("train, trace, eval and persistence round trip") {
  TempDir dir;
  REQUIRE(run_cli("gen --classes 2 --dim 16 --atoms 4 --samples 12 --test-samples 6 "
                  "--sparsity 2 --seed 3 --out " +
                      dir.file("d"),
                  dir)
              .exit_code == 0);
  {
    std::ofstream cfg(dir.file("run.cfg"));
    cfg << "atoms_per_class = 4\nlambda = 0.1\nmax_outer_iterations = 15\nseed = 11\n";
  }

  const std::string train_cmd = "train --method metaface --config " + dir.file("run.cfg") +
                                " --data " + dir.file("d_train.csv") + " --model-out " +
                                dir.file("m.txt") + " --trace-out " + dir.file("t.csv");
  const RunResult trained = run_cli(train_cmd, dir);
  CHECK(trained.exit_code == 0);
  CHECK(trained.output.find("final_objective") != std::string::npos);

  SUBCASE("trace is non-increasing") {
    std::ifstream trace(dir.file("t.csv"));
    std::string line;
    std::getline(trace, line);
    CHECK(line == "iteration,objective");
    double prev = 1e300;
    while (std::getline(trace, line)) {
      const double value = std::stod(line.substr(line.find(',') + 1));
      CHECK(value <= prev + 1e-8);
      prev = value;
    }
  }

  SUBCASE("same seed reproduces the final objective exactly") {
    const RunResult again = run_cli(
        "train --method metaface --config " + dir.file("run.cfg") + " --data " +
            dir.file("d_train.csv") + " --model-out " + dir.file("m2.txt"),
        dir);
    CHECK(again.exit_code == 0);
    CHECK(again.output == trained.output);
    CHECK(read_file(dir.file("m.txt")) == read_file(dir.file("m2.txt")));
  }

  SUBCASE("eval prints accuracy and a confusion matrix with correct row sums") {
    const RunResult eval = run_cli(
        "eval --model " + dir.file("m.txt") + " --data " + dir.file("d_test.csv"), dir);
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("accuracy") != std::string::npos);
    CHECK(eval.output.find("confusion_matrix") != std::string::npos);
    std::istringstream lines(eval.output.substr(eval.output.find("confusion_matrix")));
    std::string header;
    std::getline(lines, header);
    int total = 0;
    for (int r = 0; r < 2; ++r) {
      std::string row;
      REQUIRE(std::getline(lines, row));
      std::istringstream cells(row);
      int v, row_sum = 0;
      while (cells >> v) row_sum += v;
      CHECK(row_sum == 6);
      total += row_sum;
    }
    CHECK(total == 12);
  }

  SUBCASE("json eval is machine readable") {
    const RunResult eval = run_cli("eval --json --model " + dir.file("m.txt") +
                                       " --data " + dir.file("d_test.csv"),
                                   dir);
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("\"accuracy\"") != std::string::npos);
    CHECK(eval.output.find("\"confusion\"") != std::string::npos);
  }

  SUBCASE("saved model predicts identically after reload") {
    const RunResult a = run_cli("eval --json --model " + dir.file("m.txt") +
                                    " --data " + dir.file("d_test.csv"),
                                dir);
    const ddl::TrainedModel model = ddl::load_model(dir.file("m.txt"));
    ddl::save_model(model, dir.file("m_copy.txt"));
    const RunResult b = run_cli("eval --json --model " + dir.file("m_copy.txt") +
                                    " --data " + dir.file("d_test.csv"),
                                dir);
    CHECK(a.output == b.output);
  }

  SUBCASE("dimension mismatch fails with a runtime error") {
    REQUIRE(run_cli("gen --classes 2 --dim 9 --atoms 2 --samples 4 --test-samples 2 "
                    "--sparsity 2 --seed 1 --out " +
                        dir.file("w"),
                    dir)
                .exit_code == 0);
    const RunResult bad = run_cli(
        "eval --model " + dir.file("m.txt") + " --data " + dir.file("w_test.csv"), dir);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("dimension") != std::string::npos);
  }

  SUBCASE("missing hyperparameter names the key") {
    std::ofstream(dir.file("empty.cfg")) << "lambda = 0.1\n";
    const RunResult bad = run_cli("train --method lcksvd --config " +
                                      dir.file("empty.cfg") + " --data " +
                                      dir.file("d_train.csv") + " --model-out " +
                                      dir.file("x.txt"),
                                  dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("atoms_per_class") != std::string::npos);
  }

  SUBCASE("unknown config key is rejected") {
    std::ofstream(dir.file("bad.cfg")) << "atoms_per_class = 4\nzebra = 1\n";
    const RunResult bad = run_cli("train --method metaface --config " +
                                      dir.file("bad.cfg") + " --data " +
                                      dir.file("d_train.csv") + " --model-out " +
                                      dir.file("x.txt"),
                                  dir);
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("zebra") != std::string::npos);
  }
}

TEST_CASE("compare labels tracks and survives per-method failures") {
  TempDir dir;
  REQUIRE(run_cli("gen --classes 2 --dim 14 --atoms 3 --samples 10 --test-samples 5 "
                  "--sparsity 2 --seed 13 --out " +
                      dir.file("c"),
                  dir)
              .exit_code == 0);
  {
    std::ofstream cfg(dir.file("cmp.cfg"));
    cfg << "atoms_per_class = 3\nmax_outer_iterations = 8\nseed = 2\n";
  }
  const RunResult result = run_cli(
      "compare --methods metaface,dksvd,bogus --train " + dir.file("c_train.csv") +
          " --test " + dir.file("c_test.csv") + " --config " + dir.file("cmp.cfg"),
      dir);
  CHECK(result.exit_code == 0);
  std::istringstream lines(result.output);
  std::string line;
  std::getline(lines, line);  // header
  std::getline(lines, line);
  CHECK(line.find("metaface I") == 0);
  std::getline(lines, line);
  CHECK(line.find("dksvd II") == 0);
  std::getline(lines, line);
  CHECK(line.find("bogus error:") == 0);
}

TEST_CASE("inspect reports coherence and respects tau") {
  TempDir dir;
  REQUIRE(run_cli("gen --classes 2 --dim 12 --atoms 3 --samples 6 --test-samples 2 "
                  "--seed 5 --out " +
                      dir.file("i"),
                  dir)
              .exit_code == 0);
  const RunResult result =
      run_cli("inspect --model " + dir.file("i_dict.txt") + " --tau 0.9", dir);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("class_pair") != std::string::npos);
  CHECK(result.output.find("1-2") != std::string::npos);
  CHECK(result.output.find("atoms_above_tau") != std::string::npos);

  SUBCASE("masked evaluation runs against a structured model") {
    const RunResult masked = run_cli("eval --model " + dir.file("i_dict.txt") +
                                         " --data " + dir.file("i_test.csv") +
                                         " --lambda 0.05 --mask-tau 0.9",
                                     dir);
    CHECK(masked.exit_code == 0);
    CHECK(masked.output.find("accuracy") != std::string::npos);
  }

  SUBCASE("tau default is documented in the help text") {
    const RunResult help = run_cli("inspect --help", dir);
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("0.95") != std::string::npos);
  }

  SUBCASE("unstructured model is rejected with an explanation") {
    ddl::TrainedModel flat;
    flat.dictionary = ddl::Dictionary(ddl::Matrix::Identity(4, 4));
    flat.method = ddl::Method::dksvd;
    flat.resolved = ddl::Method::dksvd;
    flat.num_classes = 2;
    ddl::save_model(flat, dir.file("flat.txt"));
    const RunResult bad = run_cli("inspect --model " + dir.file("flat.txt"), dir);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("atom-class") != std::string::npos);
  }
}

TEST_SUITE_END();
