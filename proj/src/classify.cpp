#include "ddl/classify.hpp"

#include <cmath>

#include "parallel.hpp"

namespace ddl {

namespace {

int argbest(const Vector& scores, bool lower_wins) {
  Index best = 0;
  for (Index c = 1; c < scores.size(); ++c) {
    if (lower_wins ? scores[c] < scores[best] : scores[c] > scores[best]) best = c;
  }
  return static_cast<int>(best) + 1;
}

Vector class_residuals(const Dictionary& dicts, const Vector& query,
                       const Vector& code, const std::vector<bool>* mask) {
  const int C = dicts.num_classes();
  Vector residuals(C);
  for (int c = 1; c <= C; ++c) {
    const auto [offset, count] = dicts.class_block(c);
    Vector recon = Vector::Zero(query.size());
    for (Index k = 0; k < count; ++k) {
      const Index atom = offset + k;
      if (mask && (*mask)[static_cast<size_t>(atom)]) continue;
      recon += dicts.atoms.col(atom) * code[atom];
    }
    residuals[c - 1] = (query - recon).squaredNorm();
  }
  return residuals;
}

} // namespace

ClassificationResult classify_src(const LabeledDataset& training, const Vector& query,
                                  double lambda, const SolverOptions& opts) {
  const TrainedModel model = make_src_model(training);
  return classify_residual(model.dictionary, query, lambda, opts);
}

ClassificationResult classify_residual(const Dictionary& dicts, const Vector& query,
                                       double lambda, const SolverOptions& opts,
                                       const std::vector<bool>* mask) {
  if (!dicts.structured())
    throw DataError("residual classification requires per-class dictionaries");
  if (dicts.dim() != query.size())
    throw DataError("query dimension does not match the dictionary");
  if (mask && static_cast<Index>(mask->size()) != dicts.size())
    throw DataError("mask length does not match the atom count");

  ClassificationResult result;
  result.code = lasso_solve(dicts.atoms, query, lambda, opts);
  result.scores = class_residuals(dicts, query, result.code, mask);
  result.predicted_class = argbest(result.scores, /*lower_wins=*/true);
  return result;
}

ClassificationResult classify_residual(const std::vector<Matrix>& dicts,
                                       const Vector& query, double lambda,
                                       const SolverOptions& opts,
                                       const std::vector<bool>* mask) {
  if (dicts.empty()) throw DataError("no class dictionaries given");
  Index total = 0;
  for (const auto& d : dicts) total += d.cols();
  Matrix atoms(dicts.front().rows(), total);
  std::vector<int> atom_class;
  atom_class.reserve(static_cast<size_t>(total));
  Index col = 0;
  for (size_t c = 0; c < dicts.size(); ++c) {
    atoms.middleCols(col, dicts[c].cols()) = dicts[c];
    col += dicts[c].cols();
    for (Index k = 0; k < dicts[c].cols(); ++k)
      atom_class.push_back(static_cast<int>(c) + 1);
  }
  return classify_residual(Dictionary(std::move(atoms), std::move(atom_class)), query,
                           lambda, opts, mask);
}

ClassificationResult classify_linear(const Matrix& classifier, const Vector& code) {
  if (classifier.cols() != code.size())
    throw DataError("classifier width does not match the code length");
  ClassificationResult result;
  result.code = code;
  result.scores = classifier * code;
  result.predicted_class = argbest(result.scores, /*lower_wins=*/false);
  return result;
}

namespace {

double supervised_score(const TrainedModel& binary, const Vector& query,
                        const Vector& code) {
  const ClassifierParams& params = *binary.classifier;
  if (binary.config.classifier_form == ClassifierForm::linear)
    return params.theta->col(0).dot(code) + params.bias;
  return query.dot(*params.theta * code) + params.bias;
}

ClassificationResult classify_supervised(const TrainedModel& model, const Vector& query,
                                         double lambda, const SolverOptions& solver) {
  ClassificationResult result;
  if (!model.submodels.empty()) {
    result.scores.resize(model.num_classes);
    std::vector<Vector> codes(model.submodels.size());
    for (size_t c = 0; c < model.submodels.size(); ++c) {
      const TrainedModel& sub = model.submodels[c];
      const double lam = lambda >= 0 ? lambda : sub.config.lambda1.value_or(0.1);
      codes[c] = lasso_solve(sub.dictionary.atoms, query, lam, solver);
      result.scores[sub.positive_class - 1] = supervised_score(sub, query, codes[c]);
    }
    result.predicted_class = argbest(result.scores, /*lower_wins=*/false);
    result.code = codes[static_cast<size_t>(result.predicted_class - 1)];
    return result;
  }

  // A standalone binary model: the positive class competes with the other one.
  const double lam = lambda >= 0 ? lambda : model.config.lambda1.value_or(0.1);
  result.code = lasso_solve(model.dictionary.atoms, query, lam, solver);
  const double score = supervised_score(model, query, result.code);
  result.scores = Vector::Zero(model.num_classes);
  for (int c = 1; c <= model.num_classes; ++c)
    result.scores[c - 1] = (c == model.positive_class) ? score : -score;
  result.predicted_class = argbest(result.scores, /*lower_wins=*/false);
  return result;
}

} // namespace

ClassificationResult classify_model(const TrainedModel& model, const Vector& query,
                                    const ClassifyOptions& opts) {
  switch (model.resolved) {
    case Method::src:
    case Method::metaface:
    case Method::dlsi: {
      const double lam =
          opts.lambda >= 0 ? opts.lambda : model.config.lambda.value_or(0.1);
      std::vector<bool> mask;
      if (opts.mask_tau) {
        mask = flatten_atom_mask(model, detect_common_atoms(model, *opts.mask_tau));
        return classify_residual(model.dictionary, query, lam, opts.solver, &mask);
      }
      return classify_residual(model.dictionary, query, lam, opts.solver);
    }
    case Method::fddl: {
      const double lam =
          opts.lambda >= 0 ? opts.lambda : model.config.lambda1.value_or(0.1);
      if (!opts.fddl_per_class_coding)
        return classify_residual(model.dictionary, query, lam, opts.solver);
      // Alternative rule: code the query over each class block separately.
      const int C = model.dictionary.num_classes();
      ClassificationResult result;
      result.scores.resize(C);
      std::vector<Vector> codes(static_cast<size_t>(C));
      for (int c = 1; c <= C; ++c) {
        const Matrix block = model.dictionary.class_atoms(c);
        codes[static_cast<size_t>(c - 1)] = lasso_solve(block, query, lam, opts.solver);
        result.scores[c - 1] =
            (query - block * codes[static_cast<size_t>(c - 1)]).squaredNorm();
      }
      result.predicted_class = argbest(result.scores, /*lower_wins=*/true);
      result.code = codes[static_cast<size_t>(result.predicted_class - 1)];
      return result;
    }
    case Method::dksvd:
    case Method::lcksvd: {
      if (!model.classifier || !model.classifier->linear)
        throw DataError("model carries no linear classifier");
      const double lam = opts.lambda >= 0
                             ? opts.lambda
                             : (model.resolved == Method::dksvd
                                    ? model.config.lambda2.value_or(0.1)
                                    : model.config.lambda3.value_or(0.1));
      const Vector code = lasso_solve(model.dictionary.atoms, query, lam, opts.solver);
      return classify_linear(*model.classifier->linear, code);
    }
    case Method::supervised_dl:
      return classify_supervised(model, query, opts.lambda, opts.solver);
    default:
      throw Error("model '" + method_name(model.resolved) +
                  "' has no classification rule");
  }
}

EvalReport evaluate(const TrainedModel& model, const LabeledDataset& data,
                    const ClassifyOptions& opts, int threads) {
  data.validate();
  if (data.dim() != model.dictionary.dim())
    throw DataError("data dimension " + std::to_string(data.dim()) +
                    " does not match the model dimension " +
                    std::to_string(model.dictionary.dim()));

  const int C = std::max(model.num_classes, data.num_classes);
  EvalReport report;
  report.confusion = Eigen::MatrixXi::Zero(C, C);
  report.total = data.size();

  std::vector<int> predictions(static_cast<size_t>(data.size()));
  detail::parallel_for(data.size(), threads, [&](Index n) {
    predictions[static_cast<size_t>(n)] =
        classify_model(model, data.signals.col(n), opts).predicted_class;
  });

  Index correct = 0;
  for (Index n = 0; n < data.size(); ++n) {
    const int truth = data.labels[static_cast<size_t>(n)];
    const int predicted = predictions[static_cast<size_t>(n)];
    report.confusion(truth - 1, predicted - 1) += 1;
    if (truth == predicted) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  report.per_class_accuracy.resize(C);
  for (int c = 0; c < C; ++c) {
    const Index row_total = report.confusion.row(c).sum();
    report.per_class_accuracy[c] =
        row_total > 0 ? static_cast<double>(report.confusion(c, c)) /
                            static_cast<double>(row_total)
                      : 0.0;
  }
  return report;
}

} // namespace ddl
