#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddl/classify.hpp"
#include "ddl/data_io.hpp"
#include "ddl/model_io.hpp"
#include "ddl/run_config.hpp"
#include "ddl/trainers.hpp"

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string track_label(ddl::Method resolved) {
  switch (resolved) {
    case ddl::Method::metaface:
    case ddl::Method::dlsi:
      return "I";
    case ddl::Method::supervised_dl:
    case ddl::Method::dksvd:
    case ddl::Method::lcksvd:
    case ddl::Method::fddl:
      return "II";
    default:
      return "-";
  }
}

struct GenArgs {
  int classes = 3;
  int dim = 20;
  int atoms = 5;
  int samples = 30;
  int test_samples = 10;
  int sparsity = 3;
  double noise = 0.01;
  double coherence = 0.0;
  std::uint64_t seed = 0;
  std::string out_prefix;
};

int run_gen(const GenArgs& args) {
  ddl::SynthSpec spec;
  spec.classes = args.classes;
  spec.dim = args.dim;
  spec.atoms_per_class = args.atoms;
  spec.samples_per_class = args.samples + args.test_samples;
  spec.sparsity = args.sparsity;
  spec.noise_sigma = args.noise;
  spec.coherence = args.coherence;
  spec.seed = args.seed;
  const ddl::SynthResult result = ddl::synth_planted(spec);

  // Per-class columns come out contiguous: the first `samples` of each class
  // form the training set, the rest the test set.
  ddl::LabeledDataset train, test;
  train.signals.resize(args.dim, static_cast<ddl::Index>(args.classes) * args.samples);
  test.signals.resize(args.dim,
                      static_cast<ddl::Index>(args.classes) * args.test_samples);
  train.num_classes = test.num_classes = args.classes;
  ddl::Index ti = 0, ei = 0;
  for (int c = 0; c < args.classes; ++c) {
    const ddl::Index offset =
        static_cast<ddl::Index>(c) * (args.samples + args.test_samples);
    for (int s = 0; s < args.samples; ++s) {
      train.signals.col(ti++) = result.dataset.signals.col(offset + s);
      train.labels.push_back(c + 1);
    }
    for (int s = 0; s < args.test_samples; ++s) {
      test.signals.col(ei++) = result.dataset.signals.col(offset + args.samples + s);
      test.labels.push_back(c + 1);
    }
  }

  const std::string train_path = args.out_prefix + "_train.csv";
  const std::string test_path = args.out_prefix + "_test.csv";
  const std::string dict_path = args.out_prefix + "_dict.txt";
  ddl::save_csv(train, train_path);
  if (test.size() > 0) ddl::save_csv(test, test_path);

  ddl::TrainedModel truth;
  ddl::Matrix atoms(args.dim, static_cast<ddl::Index>(args.classes) * args.atoms);
  std::vector<int> atom_class;
  for (int c = 0; c < args.classes; ++c) {
    atoms.middleCols(static_cast<ddl::Index>(c) * args.atoms, args.atoms) =
        result.class_dictionaries[static_cast<size_t>(c)];
    for (int k = 0; k < args.atoms; ++k) atom_class.push_back(c + 1);
  }
  truth.dictionary = ddl::Dictionary(std::move(atoms), std::move(atom_class));
  truth.method = ddl::Method::metaface;  // the residual rule applies directly
  truth.resolved = ddl::Method::metaface;
  truth.num_classes = args.classes;
  truth.config.method = ddl::Method::metaface;
  truth.config.atoms_per_class = args.atoms;
  truth.config.seed = args.seed;
  truth.trace.objective = {0.0};
  ddl::save_model(truth, dict_path);

  std::cout << train_path << '\n';
  if (test.size() > 0) std::cout << test_path << '\n';
  std::cout << dict_path << '\n';
  return 0;
}

ddl::MethodConfig build_config(const std::string& method,
                               const std::string& config_path,
                               const std::optional<std::uint64_t>& seed,
                               int threads) {
  ddl::MethodConfig cfg;
  cfg.method = ddl::method_from_name(method);
  if (!config_path.empty()) {
    const ddl::RunConfig file_config = ddl::parse_config_file(config_path);
    ddl::apply_config(file_config, cfg);
    cfg.method = ddl::method_from_name(method);
  }
  if (seed) cfg.seed = *seed;
  if (threads > 0) cfg.solver.threads = threads;
  ddl::check_required_parameters(cfg);
  return cfg;
}

int run_train(const std::string& method, const std::string& config_path,
              const std::string& data_path, const std::string& model_out,
              const std::string& trace_out, const std::optional<std::uint64_t>& seed,
              int threads) {
  const ddl::MethodConfig cfg = build_config(method, config_path, seed, threads);
  const ddl::LabeledDataset data = ddl::load_csv(data_path);
  const ddl::TrainedModel model = ddl::train(data, cfg);
  ddl::save_model(model, model_out);
  if (!trace_out.empty()) ddl::save_trace_csv(model.trace, trace_out);
  std::cout << "final_objective " << format_double(model.trace.final()) << '\n';
  return 0;
}

json report_to_json(const ddl::EvalReport& report) {
  json out;
  out["accuracy"] = report.accuracy;
  out["total"] = report.total;
  out["per_class_accuracy"] = std::vector<double>(
      report.per_class_accuracy.data(),
      report.per_class_accuracy.data() + report.per_class_accuracy.size());
  std::vector<std::vector<int>> confusion;
  for (ddl::Index i = 0; i < report.confusion.rows(); ++i) {
    std::vector<int> row;
    for (ddl::Index j = 0; j < report.confusion.cols(); ++j)
      row.push_back(report.confusion(i, j));
    confusion.push_back(std::move(row));
  }
  out["confusion"] = confusion;
  return out;
}

void print_report(const ddl::EvalReport& report) {
  std::cout << "accuracy " << format_double(report.accuracy) << '\n';
  std::cout << "per_class";
  for (ddl::Index c = 0; c < report.per_class_accuracy.size(); ++c)
    std::cout << ' ' << format_double(report.per_class_accuracy[c]);
  std::cout << '\n';
  std::cout << "confusion_matrix (rows: true class, cols: predicted)\n";
  for (ddl::Index i = 0; i < report.confusion.rows(); ++i) {
    for (ddl::Index j = 0; j < report.confusion.cols(); ++j) {
      if (j) std::cout << ' ';
      std::cout << report.confusion(i, j);
    }
    std::cout << '\n';
  }
}

int run_eval(const std::string& model_path, const std::string& data_path,
             double lambda, std::optional<double> mask_tau, bool fddl_local,
             bool as_json, int threads) {
  const ddl::TrainedModel model = ddl::load_model(model_path);
  const ddl::LabeledDataset data = ddl::load_csv(data_path);
  ddl::ClassifyOptions opts;
  opts.lambda = lambda;
  opts.mask_tau = mask_tau;
  opts.fddl_per_class_coding = fddl_local;
  const ddl::EvalReport report = ddl::evaluate(model, data, opts, threads);
  if (as_json)
    std::cout << report_to_json(report).dump(2) << '\n';
  else
    print_report(report);
  return 0;
}

int run_compare(const std::string& methods_csv, const std::string& train_path,
                const std::string& test_path, const std::string& config_path,
                const std::optional<std::uint64_t>& seed, bool as_json, int threads) {
  std::vector<std::string> methods;
  std::stringstream ss(methods_csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) methods.push_back(item);
  if (methods.empty()) throw ddl::ConfigError("no methods given");

  const ddl::LabeledDataset train_data = ddl::load_csv(train_path);
  const ddl::LabeledDataset test_data = ddl::load_csv(test_path);

  json rows = json::array();
  if (!as_json)
    std::cout << "method track accuracy train_seconds final_objective\n";
  for (const std::string& name : methods) {
    json row;
    row["method"] = name;
    try {
      const ddl::MethodConfig cfg = build_config(name, config_path, seed, threads);
      const auto start = std::chrono::steady_clock::now();
      const ddl::TrainedModel model = ddl::train(train_data, cfg);
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;
      ddl::ClassifyOptions opts;
      const ddl::EvalReport report = ddl::evaluate(model, test_data, opts, threads);
      row["track"] = track_label(model.resolved);
      row["accuracy"] = report.accuracy;
      row["train_seconds"] = elapsed.count();
      row["final_objective"] = model.trace.final();
      if (!as_json)
        std::cout << name << ' ' << track_label(model.resolved) << ' '
                  << format_double(report.accuracy) << ' '
                  << format_double(elapsed.count()) << ' '
                  << format_double(model.trace.final()) << '\n';
    } catch (const std::exception& e) {
      row["error"] = e.what();
      if (!as_json) std::cout << name << " error: " << e.what() << '\n';
    }
    rows.push_back(std::move(row));
  }
  if (as_json) std::cout << rows.dump(2) << '\n';
  return 0;
}

int run_inspect(const std::string& model_path, double tau) {
  const ddl::TrainedModel model = ddl::load_model(model_path);
  if (!model.dictionary.structured())
    throw ddl::DataError(
        "coherence inspection requires a structured (per-class) dictionary; "
        "this model carries no atom-class assignment");

  const int C = model.dictionary.num_classes();
  std::cout << "class_pair max_coherence mean_coherence\n";
  for (int i = 1; i <= C; ++i) {
    for (int j = i + 1; j <= C; ++j) {
      const ddl::Matrix cross = model.dictionary.class_atoms(i).transpose() *
                                model.dictionary.class_atoms(j);
      std::cout << i << '-' << j << ' ' << format_double(cross.cwiseAbs().maxCoeff())
                << ' ' << format_double(cross.cwiseAbs().mean()) << '\n';
    }
  }
  const auto mask = ddl::detect_common_atoms(model, tau);
  std::cout << "atoms_above_tau " << format_double(tau) << '\n';
  for (int c = 1; c <= C; ++c) {
    std::cout << "class " << c << ':';
    const auto& class_mask = mask[static_cast<size_t>(c - 1)];
    for (size_t k = 0; k < class_mask.size(); ++k)
      if (class_mask[k]) std::cout << ' ' << k;
    std::cout << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative dictionary learning: train, evaluate and "
               "inspect sparse-coding classifiers"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "Generate planted synthetic data");
  cmd_gen->add_option("--classes", gen.classes, "Number of classes")
      ->check(CLI::PositiveNumber);
  cmd_gen->add_option("--dim", gen.dim, "Signal dimension")->check(CLI::PositiveNumber);
  cmd_gen->add_option("--atoms", gen.atoms, "Atoms per class")
      ->check(CLI::PositiveNumber);
  cmd_gen->add_option("--samples", gen.samples, "Training samples per class")
      ->check(CLI::PositiveNumber);
  cmd_gen->add_option("--test-samples", gen.test_samples, "Test samples per class")
      ->check(CLI::NonNegativeNumber);
  cmd_gen->add_option("--sparsity", gen.sparsity, "Nonzeros per sample")
      ->check(CLI::PositiveNumber);
  cmd_gen->add_option("--noise", gen.noise, "Gaussian noise level")
      ->check(CLI::NonNegativeNumber);
  cmd_gen->add_option("--coherence", gen.coherence, "Cross-class coherence in [0,1]");
  cmd_gen->add_option("--seed", gen.seed, "RNG seed");
  cmd_gen->add_option("--out", gen.out_prefix, "Output path prefix")->required();

  std::string train_method, train_config, train_data, train_model_out, train_trace;
  std::optional<std::uint64_t> train_seed;
  int threads = 1;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a model");
  cmd_train
      ->add_option("--method", train_method,
                   "src|metaface|dlsi|supervised_dl|dksvd|lcksvd|fddl|unified")
      ->required();
  cmd_train->add_option("--config", train_config, "key=value config file");
  cmd_train->add_option("--data", train_data, "Training CSV")->required();
  cmd_train->add_option("--model-out", train_model_out, "Model file to write")
      ->required();
  cmd_train->add_option("--trace-out", train_trace, "Objective trace CSV");
  cmd_train->add_option("--seed", train_seed, "Seed override");
  cmd_train->add_option("--threads", threads, "Worker threads")
      ->check(CLI::PositiveNumber);

  std::string eval_model, eval_data;
  double eval_lambda = -1.0;
  double mask_tau_flag = 0.95;
  bool fddl_local = false;
  bool eval_json = false;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
  cmd_eval->add_option("--model", eval_model, "Model file")->required();
  cmd_eval->add_option("--data", eval_data, "Dataset CSV")->required();
  cmd_eval->add_option("--lambda", eval_lambda,
                       "Coding weight (default: the model's training value)");
  auto* mask_opt = cmd_eval->add_option(
      "--mask-tau", mask_tau_flag,
      "Mask common atoms above this coherence (default 0.95)");
  mask_opt->expected(0, 1);
  cmd_eval->add_flag("--fddl-local", fddl_local, "Per-class coding rule for fddl");
  cmd_eval->add_flag("--json", eval_json, "Machine-readable output");
  cmd_eval->add_option("--threads", threads, "Worker threads")
      ->check(CLI::PositiveNumber);

  std::string cmp_methods, cmp_train, cmp_test, cmp_config;
  std::optional<std::uint64_t> cmp_seed;
  bool cmp_json = false;
  CLI::App* cmd_compare =
      app.add_subcommand("compare", "Train and evaluate several methods");
  cmd_compare->add_option("--methods", cmp_methods, "Comma-separated method list")
      ->required();
  cmd_compare->add_option("--train", cmp_train, "Training CSV")->required();
  cmd_compare->add_option("--test", cmp_test, "Test CSV")->required();
  cmd_compare->add_option("--config", cmp_config, "key=value config file");
  cmd_compare->add_option("--seed", cmp_seed, "Seed override");
  cmd_compare->add_flag("--json", cmp_json, "Machine-readable output");
  cmd_compare->add_option("--threads", threads, "Worker threads")
      ->check(CLI::PositiveNumber);

  std::string inspect_model;
  double inspect_tau = 0.95;
  CLI::App* cmd_inspect =
      app.add_subcommand("inspect", "Report cross-class atom coherence");
  cmd_inspect->add_option("--model", inspect_model, "Model file")->required();
  cmd_inspect->add_option("--tau", inspect_tau,
                          "Common-atom threshold in (0,1], default 0.95");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_gen->parsed()) return run_gen(gen);
    if (cmd_train->parsed())
      return run_train(train_method, train_config, train_data, train_model_out,
                       train_trace, train_seed, threads);
    if (cmd_eval->parsed()) {
      std::optional<double> mask_tau;
      if (mask_opt->count() > 0) mask_tau = mask_tau_flag;
      return run_eval(eval_model, eval_data, eval_lambda, mask_tau, fddl_local,
                      eval_json, threads);
    }
    if (cmd_compare->parsed())
      return run_compare(cmp_methods, cmp_train, cmp_test, cmp_config, cmp_seed,
                         cmp_json, threads);
    if (cmd_inspect->parsed()) return run_inspect(inspect_model, inspect_tau);
  } catch (const ddl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
