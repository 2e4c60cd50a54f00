#include "ddl/trainers.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "parallel.hpp"

namespace ddl {

std::string method_name(Method m) {
  switch (m) {
    case Method::src: return "src";
    case Method::metaface: return "metaface";
    case Method::dlsi: return "dlsi";
    case Method::supervised_dl: return "supervised_dl";
    case Method::dksvd: return "dksvd";
    case Method::lcksvd: return "lcksvd";
    case Method::fddl: return "fddl";
    case Method::unified: return "unified";
  }
  throw ConfigError("unknown method tag");
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::src, Method::metaface, Method::dlsi, Method::supervised_dl,
                   Method::dksvd, Method::lcksvd, Method::fddl, Method::unified})
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

FidelityKind fidelity_from_name(const std::string& name) {
  if (name == "plain") return FidelityKind::plain;
  if (name == "per_class") return FidelityKind::per_class;
  if (name == "discriminative") return FidelityKind::discriminative;
  throw ConfigError("unknown fidelity term '" + name + "'");
}

DiscriminationKind discrimination_from_name(const std::string& name) {
  if (name == "none") return DiscriminationKind::none;
  if (name == "linear_regression") return DiscriminationKind::linear_regression;
  if (name == "label_consistent") return DiscriminationKind::label_consistent;
  if (name == "fisher") return DiscriminationKind::fisher;
  if (name == "logistic") return DiscriminationKind::logistic;
  throw ConfigError("unknown discrimination term '" + name + "'");
}

void MethodConfig::validate() const {
  auto check = [](const std::optional<double>& v, const char* name) {
    if (v && *v < 0) throw ConfigError(std::string(name) + " must be nonnegative");
  };
  check(lambda, "lambda");
  check(lambda0, "lambda0");
  check(lambda1, "lambda1");
  check(lambda2, "lambda2");
  check(lambda3, "lambda3");
  check(eta, "eta");
  if (atoms_per_class < 0 || total_atoms < 0)
    throw ConfigError("atom counts must be nonnegative");
  schedule.validate();
  solver.validate();
}

namespace detail {

double resolve_sparsity_weight(const std::optional<double>& configured,
                               const Matrix& signals) {
  if (configured) return *configured;
  double mean_norm = 0.0;
  for (Index n = 0; n < signals.cols(); ++n) mean_norm += signals.col(n).norm();
  mean_norm /= std::max<Index>(1, signals.cols());
  return 0.1 * mean_norm;
}

Matrix init_atoms_from_columns(const Matrix& signals, Index count,
                               std::mt19937_64& rng) {
  if (signals.cols() < 1) throw DataError("cannot initialize atoms from an empty matrix");
  std::vector<Index> order(static_cast<size_t>(signals.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::normal_distribution<double> jitter(0.0, 0.01);
  Matrix atoms(signals.rows(), count);
  for (Index k = 0; k < count; ++k) {
    Vector col = signals.col(order[static_cast<size_t>(k) % order.size()]);
    if (k >= static_cast<Index>(order.size()))  // reused column: break the tie
      for (Index i = 0; i < col.size(); ++i) col[i] += jitter(rng);
    const double norm = col.norm();
    atoms.col(k) = norm > 0 ? Vector(col / norm) : col;
  }
  return atoms;
}

Matrix init_atoms_from_columns(const Matrix& signals, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_atoms_from_columns(signals, count, rng);
}

Matrix ridge_fit(const Matrix& targets, const Matrix& codes, double ridge) {
  Matrix gram = codes * codes.transpose();
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(codes * targets.transpose()).transpose();
}

} // namespace detail

namespace {

double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

double stable_logistic_deriv(double v) {
  // d/dv log(1 + exp(-v)) = -1 / (1 + exp(v))
  if (v >= 0) {
    const double e = std::exp(-v);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(v));
}

void require_nonempty_classes(const LabeledDataset& data) {
  for (int c = 1; c <= data.num_classes; ++c)
    if (data.class_count(c) == 0)
      throw DataError("class " + std::to_string(c) + " has no samples");
}

std::vector<int> contiguous_atom_classes(int num_classes, int atoms_per_class) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(num_classes) * atoms_per_class);
  for (int c = 1; c <= num_classes; ++c)
    for (int k = 0; k < atoms_per_class; ++k) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------
// Track I: per-class dictionaries, optionally incoherence-penalized.
// ---------------------------------------------------------------------------

TrainedModel train_track1(const LabeledDataset& data, MethodConfig cfg, Method tag,
                          double eta) {
  data.validate();
  cfg.validate();
  require_nonempty_classes(data);
  if (cfg.atoms_per_class < 1)
    throw ConfigError("atoms_per_class is required for " + method_name(tag));
  if (eta < 0) throw ConfigError("eta must be nonnegative");

  const int C = data.num_classes;
  const Index apc = cfg.atoms_per_class;
  const double lambda = detail::resolve_sparsity_weight(cfg.lambda, data.signals);

  std::mt19937_64 rng(cfg.seed);
  std::vector<Matrix> class_signals(static_cast<size_t>(C));
  std::vector<Matrix> dicts(static_cast<size_t>(C));
  std::vector<Matrix> codes(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    class_signals[c] = data.class_matrix(c + 1);
    dicts[c] = detail::init_atoms_from_columns(class_signals[c], apc, rng);
  }
  for (int c = 0; c < C; ++c)
    codes[c] = batch_sparse_code(dicts[c], class_signals[c], lambda, cfg.solver);

  auto objective = [&] {
    double value = 0.0;
    for (int c = 0; c < C; ++c)
      value += (class_signals[c] - dicts[c] * codes[c]).squaredNorm() +
               lambda * l1_norm(codes[c]);
    if (eta > 0)
      for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j)
          if (i != j) value += eta * incoherence_penalty(dicts[i], dicts[j]);
    return value;
  };

  std::vector<BlockUpdate> blocks;
  blocks.push_back({"sparse_codes", [&] {
                      for (int c = 0; c < C; ++c)
                        codes[c] = batch_sparse_code(dicts[c], class_signals[c],
                                                     lambda, cfg.solver);
                    }});
  for (int c = 0; c < C; ++c) {
    blocks.push_back({"dictionary[" + std::to_string(c + 1) + "]", [&, c] {
                        if (eta > 0) {
                          std::vector<const Matrix*> others;
                          for (int j = 0; j < C; ++j)
                            if (j != c) others.push_back(&dicts[j]);
                          // The objective counts ordered pairs, so the update
                          // sees twice the single-pair weight.
                          dicts[c] = update_dictionary_incoherent(
                                         class_signals[c], codes[c],
                                         Dictionary(dicts[c]), others, 2.0 * eta)
                                         .atoms;
                        } else {
                          dicts[c] = update_dictionary_ls(class_signals[c], codes[c],
                                                          Dictionary(dicts[c]))
                                         .atoms;
                        }
                      }});
  }

  TrainedModel model;
  model.trace = alternate_minimize(blocks, objective, cfg.schedule);

  Matrix atoms(data.dim(), apc * C);
  for (int c = 0; c < C; ++c) atoms.middleCols(apc * c, apc) = dicts[c];
  model.dictionary = Dictionary(std::move(atoms), contiguous_atom_classes(C, cfg.atoms_per_class));
  model.method = tag;
  model.resolved = eta > 0 ? Method::dlsi : Method::metaface;
  model.num_classes = C;
  cfg.lambda = lambda;
  cfg.eta = eta;
  model.config = cfg;
  return model;
}

// ---------------------------------------------------------------------------
// Track II via fused stacking: reconstruction plus the selected label
// channels solved as one conventional DL problem over stacked signals.
// ---------------------------------------------------------------------------

TrainedModel train_stacked(const LabeledDataset& data, MethodConfig cfg, Method tag,
                           double consistency_weight, double regression_weight,
                           double sparsity, bool structured) {
  data.validate();
  cfg.validate();

  const int C = data.num_classes;
  Index num_atoms;
  if (structured) {
    if (cfg.atoms_per_class < 1)
      throw ConfigError("atoms_per_class is required for " + method_name(tag));
    num_atoms = static_cast<Index>(cfg.atoms_per_class) * C;
  } else {
    num_atoms = cfg.total_atoms > 0
                    ? cfg.total_atoms
                    : static_cast<Index>(cfg.atoms_per_class) * C;
    if (num_atoms < 1)
      throw ConfigError("total_atoms (or atoms_per_class) is required for " +
                        method_name(tag));
  }

  const Matrix& X = data.signals;
  std::mt19937_64 rng(cfg.seed);
  Matrix atoms(data.dim(), num_atoms);
  std::vector<int> atom_class;
  if (structured) {
    require_nonempty_classes(data);
    atom_class = contiguous_atom_classes(C, cfg.atoms_per_class);
    for (int c = 0; c < C; ++c)
      atoms.middleCols(static_cast<Index>(c) * cfg.atoms_per_class, cfg.atoms_per_class) =
          detail::init_atoms_from_columns(data.class_matrix(c + 1),
                                          cfg.atoms_per_class, rng);
  } else {
    atoms = detail::init_atoms_from_columns(X, num_atoms, rng);
  }

  Matrix codes = batch_sparse_code(atoms, X, sparsity, cfg.solver);

  // Stack the active channels under the reconstruction block. A zero-weight
  // channel is omitted entirely, which keeps the degenerate configurations
  // literally identical to conventional DL on X.
  const bool use_consistency = consistency_weight > 0;
  const bool use_regression = regression_weight > 0;
  Index rows = data.dim();
  Index consistency_offset = 0, regression_offset = 0;
  Matrix indicator, ideal_codes;
  if (use_consistency) {
    ideal_codes = build_consistency_matrix(data.labels, atom_class);
    consistency_offset = rows;
    rows += num_atoms;
  }
  if (use_regression) {
    indicator = build_label_indicator(data.labels, C);
    regression_offset = rows;
    rows += C;
  }

  Matrix stacked_signals(rows, X.cols());
  stacked_signals.topRows(data.dim()) = X;
  Matrix stacked_atoms(rows, num_atoms);
  stacked_atoms.topRows(data.dim()) = atoms;
  if (use_consistency) {
    const double scale = std::sqrt(consistency_weight);
    stacked_signals.middleRows(consistency_offset, num_atoms) = scale * ideal_codes;
    stacked_atoms.middleRows(consistency_offset, num_atoms) =
        scale * detail::ridge_fit(ideal_codes, codes);
  }
  if (use_regression) {
    const double scale = std::sqrt(regression_weight);
    stacked_signals.middleRows(regression_offset, C) = scale * indicator;
    stacked_atoms.middleRows(regression_offset, C) =
        scale * detail::ridge_fit(indicator, codes);
  }
  stacked_atoms = project_columns(std::move(stacked_atoms));

  auto objective = [&] {
    return (stacked_signals - stacked_atoms * codes).squaredNorm() +
           sparsity * l1_norm(codes);
  };
  std::vector<BlockUpdate> blocks = {
      {"sparse_codes",
       [&] { codes = batch_sparse_code(stacked_atoms, stacked_signals, sparsity, cfg.solver); }},
      {"dictionary",
       [&] {
         stacked_atoms =
             update_dictionary_ls(stacked_signals, codes, Dictionary(stacked_atoms)).atoms;
       }},
  };

  TrainedModel model;
  model.trace = alternate_minimize(blocks, objective, cfg.schedule);

  // Split the stacked dictionary and renormalize so the signal block has
  // unit columns; the classifier blocks absorb the inverse scale so that
  // predictions on rescaled codes are unchanged.
  Matrix final_atoms = stacked_atoms.topRows(data.dim());
  Matrix classifier, transform;
  if (use_regression)
    classifier = stacked_atoms.middleRows(regression_offset, C) /
                 std::sqrt(regression_weight);
  if (use_consistency)
    transform = stacked_atoms.middleRows(consistency_offset, num_atoms) /
                std::sqrt(consistency_weight);
  for (Index k = 0; k < num_atoms; ++k) {
    const double norm = final_atoms.col(k).norm();
    if (norm > 0) {
      final_atoms.col(k) /= norm;
      if (use_regression) classifier.col(k) /= norm;
      if (use_consistency) transform.col(k) /= norm;
    }
  }

  model.dictionary = Dictionary(std::move(final_atoms), atom_class);
  if (use_regression || use_consistency) {
    ClassifierParams params;
    if (use_regression) params.linear = classifier;
    if (use_consistency) params.code_transform = transform;
    model.classifier = params;
  }
  model.method = tag;
  model.resolved = use_consistency ? Method::lcksvd
                                   : (use_regression ? Method::dksvd : Method::unified);
  model.num_classes = C;
  model.config = cfg;
  return model;
}

// ---------------------------------------------------------------------------
// Supervised DL: joint dictionary, codes and logistic classifier.
// ---------------------------------------------------------------------------

struct LogisticDesign {
  ClassifierForm form;
  Matrix weights;  // K x 1 (linear) or d x K (bilinear)
  double bias = 0.0;

  Vector code_direction(const Vector& x) const {
    if (form == ClassifierForm::linear) return weights.col(0);
    return weights.transpose() * x;
  }
  double score(const Vector& x, const Vector& a) const {
    return code_direction(x).dot(a) + bias;
  }
};

double logistic_data_loss(const LogisticDesign& design, const Matrix& X,
                          const Matrix& A, const Vector& y) {
  double value = 0.0;
  for (Index n = 0; n < X.cols(); ++n)
    value += logistic_loss(y[n] * design.score(X.col(n), A.col(n)));
  return value;
}

// Monotone proximal update of one code column for
//   C(y * f(x, a)) + l0 ||x - D a||^2 + l1 ||a||_1.
void update_code_logistic(const Matrix& D, const Vector& x, double y,
                          const Vector& direction, double bias, double l0,
                          double l1, double gram_top, Eigen::Ref<Vector> a) {
  const double lipschitz = 2.0 * l0 * gram_top + 0.25 * direction.squaredNorm();
  double step = 1.0 / std::max(lipschitz, 1e-12);

  auto smooth = [&](const Vector& v) {
    return logistic_loss(y * (direction.dot(v) + bias)) +
           l0 * (x - D * v).squaredNorm();
  };

  Vector current = a;
  double g_cur = smooth(current);
  for (int it = 0; it < 30; ++it) {
    const double margin = y * (direction.dot(current) + bias);
    Vector grad = stable_logistic_deriv(margin) * y * direction;
    if (l0 > 0) grad.noalias() += 2.0 * l0 * (D.transpose() * (D * current - x));

    Vector next(current.size());
    double g_next = 0.0;
    for (;;) {
      for (Index j = 0; j < current.size(); ++j)
        next[j] = soft_threshold(current[j] - step * grad[j], step * l1);
      const Vector diff = next - current;
      g_next = smooth(next);
      if (g_next <= g_cur + grad.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-12)
        break;
      step *= 0.5;
      if (step < 1e-300) { next = current; g_next = g_cur; break; }
    }
    const double change = (next - current).norm();
    current = next;
    g_cur = g_next;
    step *= 1.5;  // let the estimate recover between iterations
    if (change <= 1e-10 * std::max(1.0, current.norm())) break;
  }
  a = current;
}

// Backtracking gradient descent on the regularized logistic objective over
// the classifier parameters (the bias is unregularized).
void update_classifier(LogisticDesign& design, const Matrix& X, const Matrix& A,
                       const Vector& y, double reg) {
  auto loss = [&](const LogisticDesign& d) {
    return logistic_data_loss(d, X, A, y) + reg * d.weights.squaredNorm();
  };

  double current = loss(design);
  double step = 1.0;
  for (int it = 0; it < 100; ++it) {
    Matrix grad_w = Matrix::Zero(design.weights.rows(), design.weights.cols());
    double grad_b = 0.0;
    for (Index n = 0; n < X.cols(); ++n) {
      const double margin = y[n] * design.score(X.col(n), A.col(n));
      const double slope = stable_logistic_deriv(margin) * y[n];
      if (design.form == ClassifierForm::linear)
        grad_w.col(0) += slope * A.col(n);
      else
        grad_w.noalias() += slope * (X.col(n) * A.col(n).transpose());
      grad_b += slope;
    }
    grad_w.noalias() += 2.0 * reg * design.weights;

    const double grad_sq = grad_w.squaredNorm() + grad_b * grad_b;
    if (grad_sq <= 1e-24 * std::max(1.0, current)) break;

    LogisticDesign trial = design;
    double next = current;
    for (;;) {
      trial.weights = design.weights - step * grad_w;
      trial.bias = design.bias - step * grad_b;
      next = loss(trial);
      if (next <= current - 1e-4 * step * grad_sq) break;
      step *= 0.5;
      if (step < 1e-300) { trial = design; next = current; break; }
    }
    design = trial;
    if (current - next <= 1e-12 * std::max(1.0, current)) { current = next; break; }
    current = next;
    step *= 2.0;
  }
}

TrainedModel train_supervised_binary(const LabeledDataset& data, MethodConfig cfg,
                                     Method tag, int positive_class) {
  data.validate();
  cfg.validate();

  const Matrix& X = data.signals;
  const Index N = X.cols();
  Vector y(N);
  for (Index n = 0; n < N; ++n)
    y[n] = data.labels[static_cast<size_t>(n)] == positive_class ? 1.0 : -1.0;

  Index num_atoms = cfg.total_atoms > 0
                        ? cfg.total_atoms
                        : static_cast<Index>(cfg.atoms_per_class) * data.num_classes;
  if (num_atoms < 1)
    throw ConfigError("total_atoms (or atoms_per_class) is required for supervised_dl");

  const double fid_weight = cfg.lambda0.value_or(1.0);
  const double sparsity = detail::resolve_sparsity_weight(cfg.lambda1, X);
  const double reg = cfg.lambda2.value_or(1.0);

  Matrix atoms = detail::init_atoms_from_columns(X, num_atoms, cfg.seed);
  Matrix codes =
      fid_weight > 0
          ? batch_sparse_code(atoms, X, sparsity / fid_weight, cfg.solver)
          : Matrix::Zero(num_atoms, N);

  LogisticDesign design;
  design.form = cfg.classifier_form;
  if (design.form == ClassifierForm::linear) {
    // Ridge fit of the margins on the initial codes.
    design.weights = detail::ridge_fit(y.transpose(), codes).transpose();
  } else {
    design.weights = Matrix::Zero(data.dim(), num_atoms);
  }
  design.bias = 0.0;

  double gram_current = gram_spectral_norm(atoms);

  auto objective = [&] {
    return logistic_data_loss(design, X, codes, y) +
           fid_weight * (X - atoms * codes).squaredNorm() + sparsity * l1_norm(codes) +
           reg * design.weights.squaredNorm();
  };

  std::vector<BlockUpdate> blocks = {
      {"sparse_codes",
       [&] {
         ddl::detail::parallel_for(N, cfg.solver.threads, [&](Index n) {
           update_code_logistic(atoms, X.col(n), y[n], design.code_direction(X.col(n)),
                                design.bias, fid_weight, sparsity, gram_current,
                                codes.col(n));
         });
       }},
      {"dictionary",
       [&] {
         if (fid_weight > 0) {
           atoms = update_dictionary_ls(X, codes, Dictionary(atoms)).atoms;
           gram_current = gram_spectral_norm(atoms);
         }
       }},
      {"classifier", [&] { update_classifier(design, X, codes, y, reg); }},
  };

  TrainedModel model;
  model.trace = alternate_minimize(blocks, objective, cfg.schedule);
  model.dictionary = Dictionary(std::move(atoms));
  ClassifierParams params;
  params.theta = design.weights;
  params.bias = design.bias;
  model.classifier = params;
  model.method = tag;
  model.resolved = Method::supervised_dl;
  model.num_classes = data.num_classes;
  model.positive_class = positive_class;
  cfg.lambda0 = fid_weight;
  cfg.lambda1 = sparsity;
  cfg.lambda2 = reg;
  model.config = cfg;
  return model;
}

// ---------------------------------------------------------------------------
// FDDL
// ---------------------------------------------------------------------------

TrainedModel train_fddl_core(const LabeledDataset& data, MethodConfig cfg, Method tag) {
  data.validate();
  cfg.validate();
  require_nonempty_classes(data);
  if (cfg.atoms_per_class < 1)
    throw ConfigError("atoms_per_class is required for fddl");

  const int C = data.num_classes;
  const Index apc = cfg.atoms_per_class;
  const Index K = apc * C;
  const Matrix& X = data.signals;
  const double sparsity = detail::resolve_sparsity_weight(cfg.lambda1, X);
  const double fisher_weight = cfg.lambda2.value_or(1.0);
  const double elastic = cfg.eta.value_or(1.0);

  std::mt19937_64 rng(cfg.seed);
  Matrix atoms(data.dim(), K);
  std::vector<Matrix> class_signals(static_cast<size_t>(C));
  std::vector<std::vector<Index>> class_cols(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c) {
    class_signals[c] = data.class_matrix(c + 1);
    class_cols[c] = data.class_columns(c + 1);
    atoms.middleCols(apc * c, apc) =
        detail::init_atoms_from_columns(class_signals[c], apc, rng);
  }
  const std::vector<int> atom_class = contiguous_atom_classes(C, cfg.atoms_per_class);

  Matrix codes = batch_sparse_code(atoms, X, sparsity, cfg.solver);

  auto structured = [&] { return Dictionary(atoms, atom_class); };

  auto class_code_block = [&](int c) {
    Matrix block(K, static_cast<Index>(class_cols[c].size()));
    for (size_t i = 0; i < class_cols[c].size(); ++i)
      block.col(static_cast<Index>(i)) = codes.col(class_cols[c][i]);
    return block;
  };

  auto fidelity_total = [&] {
    double value = 0.0;
    const Dictionary dict = structured();
    for (int c = 0; c < C; ++c)
      value += discriminative_fidelity(class_signals[c], dict, class_code_block(c), c + 1);
    return value;
  };

  auto objective = [&] {
    const FisherTerm fisher = fisher_term(codes, data.labels, C, elastic);
    return fidelity_total() + fisher_weight * fisher.value + sparsity * l1_norm(codes);
  };

  // Smooth part of the class-c coefficient subproblem (everything except the
  // l1 penalty), evaluated with the candidate block written into `codes`.
  auto smooth_for_class = [&](int c) {
    const Dictionary dict = structured();
    const FisherTerm fisher = fisher_term(codes, data.labels, C, elastic);
    return discriminative_fidelity(class_signals[c], dict, class_code_block(c), c + 1) +
           fisher_weight * fisher.value;
  };

  auto code_gradient_for_class = [&](int c) {
    const Matrix block = class_code_block(c);
    const Matrix& Xc = class_signals[c];
    Matrix grad = 2.0 * (atoms.transpose() * (atoms * block - Xc));
    for (int j = 0; j < C; ++j) {
      const auto sub = atoms.middleCols(apc * j, apc);
      const auto rows = block.middleRows(apc * j, apc);
      if (j == c)
        grad.middleRows(apc * j, apc) +=
            2.0 * (sub.transpose() * (sub * rows - Xc));
      else
        grad.middleRows(apc * j, apc) += 2.0 * (sub.transpose() * (sub * rows));
    }
    const FisherTerm fisher = fisher_term(codes, data.labels, C, elastic);
    for (size_t i = 0; i < class_cols[c].size(); ++i)
      grad.col(static_cast<Index>(i)) +=
          fisher_weight * fisher.gradient.col(class_cols[c][i]);
    return grad;
  };

  std::vector<double> class_steps(static_cast<size_t>(C), 0.0);
  {
    const double top = gram_spectral_norm(atoms);
    const double rough = 2.0 * top * (2.0 + 1.0) + fisher_weight * (4.0 + 2.0 * elastic);
    std::fill(class_steps.begin(), class_steps.end(), 1.0 / std::max(rough, 1e-12));
  }

  auto write_block = [&](int c, const Matrix& block) {
    for (size_t i = 0; i < class_cols[c].size(); ++i)
      codes.col(class_cols[c][i]) = block.col(static_cast<Index>(i));
  };

  auto update_class_codes = [&](int c) {
    Matrix current = class_code_block(c);
    double g_cur = smooth_for_class(c);
    double step = class_steps[static_cast<size_t>(c)];
    if (step <= 0) step = 1.0;

    for (int it = 0; it < 40; ++it) {
      const Matrix grad = code_gradient_for_class(c);
      Matrix next(current.rows(), current.cols());
      double g_next = 0.0;
      for (;;) {
        for (Index i = 0; i < current.size(); ++i)
          next.data()[i] = soft_threshold(current.data()[i] - step * grad.data()[i],
                                          step * sparsity);
        write_block(c, next);
        g_next = smooth_for_class(c);
        const Matrix diff = next - current;
        if (g_next <= g_cur + (grad.array() * diff.array()).sum() +
                          diff.squaredNorm() / (2.0 * step) + 1e-12)
          break;
        step *= 0.5;
        if (step < 1e-300) { next = current; write_block(c, next); g_next = g_cur; break; }
      }
      const double total_cur = g_cur + sparsity * l1_norm(current);
      const double total_next = g_next + sparsity * l1_norm(next);
      if (total_next > total_cur) {  // numerical failsafe: keep the old block
        write_block(c, current);
        break;
      }
      const double change = (next - current).norm();
      current = next;
      g_cur = g_next;
      step *= 1.5;
      if (total_cur - total_next <= 1e-10 * std::max(1.0, total_cur) &&
          change <= 1e-8 * std::max(1.0, current.norm()))
        break;
    }
    class_steps[static_cast<size_t>(c)] = step;
  };

  auto update_class_dictionary = [&](int c) {
    // Columns of D_c minimize three quadratic fits: the full reconstruction,
    // the own-class fit, and the suppression of cross-class contributions.
    const Matrix own_rows_all = codes.middleRows(apc * c, apc);
    Matrix full_target = X - atoms * codes;
    full_target.noalias() += atoms.middleCols(apc * c, apc) * own_rows_all;

    const Index n_c = static_cast<Index>(class_cols[c].size());
    Matrix own_rows_class(apc, n_c);
    for (Index i = 0; i < n_c; ++i)
      own_rows_class.col(i) = own_rows_all.col(class_cols[c][static_cast<size_t>(i)]);

    std::vector<Index> other_cols;
    for (Index n = 0; n < X.cols(); ++n)
      if (data.labels[static_cast<size_t>(n)] != c + 1) other_cols.push_back(n);
    Matrix own_rows_other(apc, static_cast<Index>(other_cols.size()));
    for (size_t i = 0; i < other_cols.size(); ++i)
      own_rows_other.col(static_cast<Index>(i)) = own_rows_all.col(other_cols[i]);
    const Matrix zeros = Matrix::Zero(data.dim(), static_cast<Index>(other_cols.size()));

    std::vector<DictionaryFitTerm> terms = {{&full_target, &own_rows_all},
                                            {&class_signals[c], &own_rows_class},
                                            {&zeros, &own_rows_other}};
    Dictionary block(atoms.middleCols(apc * c, apc));
    atoms.middleCols(apc * c, apc) = update_dictionary_ls_sum(terms, block).atoms;
  };

  std::vector<BlockUpdate> blocks;
  for (int c = 0; c < C; ++c)
    blocks.push_back({"codes[" + std::to_string(c + 1) + "]",
                      [&, c] { update_class_codes(c); }});
  for (int c = 0; c < C; ++c)
    blocks.push_back({"dictionary[" + std::to_string(c + 1) + "]",
                      [&, c] { update_class_dictionary(c); }});

  TrainedModel model;
  model.trace = alternate_minimize(blocks, objective, cfg.schedule);
  model.dictionary = Dictionary(atoms, atom_class);
  model.codes = codes;
  model.method = tag;
  model.resolved = Method::fddl;
  model.num_classes = C;
  cfg.lambda1 = sparsity;
  cfg.lambda2 = fisher_weight;
  cfg.eta = elastic;
  model.config = cfg;
  return model;
}

} // namespace

// ---------------------------------------------------------------------------
// Public trainers
// ---------------------------------------------------------------------------

TrainedModel train_metaface(const LabeledDataset& data, const MethodConfig& cfg) {
  return train_track1(data, cfg, Method::metaface, 0.0);
}

TrainedModel train_dlsi(const LabeledDataset& data, const MethodConfig& cfg) {
  return train_track1(data, cfg, Method::dlsi, cfg.eta.value_or(0.5));
}

std::vector<std::vector<bool>> detect_common_atoms(const TrainedModel& model,
                                                   double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!model.dictionary.structured())
    throw DataError("common-atom detection requires per-class dictionaries");

  const int C = model.dictionary.num_classes();
  std::vector<std::vector<bool>> mask(static_cast<size_t>(C));
  for (int c = 1; c <= C; ++c)
    mask[static_cast<size_t>(c - 1)].assign(
        static_cast<size_t>(model.dictionary.class_block(c).second), false);

  for (int i = 1; i <= C; ++i) {
    for (int j = i + 1; j <= C; ++j) {
      const Matrix cross = model.dictionary.class_atoms(i).transpose() *
                           model.dictionary.class_atoms(j);
      for (Index k = 0; k < cross.rows(); ++k)
        for (Index l = 0; l < cross.cols(); ++l)
          if (std::abs(cross(k, l)) > tau) {
            mask[static_cast<size_t>(i - 1)][static_cast<size_t>(k)] = true;
            mask[static_cast<size_t>(j - 1)][static_cast<size_t>(l)] = true;
          }
    }
  }
  return mask;
}

std::vector<bool> flatten_atom_mask(const TrainedModel& model,
                                    const std::vector<std::vector<bool>>& mask) {
  std::vector<bool> flat(static_cast<size_t>(model.dictionary.size()), false);
  for (int c = 1; c <= model.dictionary.num_classes(); ++c) {
    const auto [offset, count] = model.dictionary.class_block(c);
    const auto& class_mask = mask[static_cast<size_t>(c - 1)];
    for (Index k = 0; k < count; ++k)
      flat[static_cast<size_t>(offset + k)] = class_mask[static_cast<size_t>(k)];
  }
  return flat;
}

TrainedModel train_supervised_dl(const LabeledDataset& data, const MethodConfig& cfg) {
  data.validate();
  if (data.num_classes != 2)
    throw ConfigError(
        "supervised_dl trains a binary classifier; use the one-vs-all wrapper "
        "(train_one_vs_all_supervised) for more than two classes");
  return train_supervised_binary(data, cfg, Method::supervised_dl, 1);
}

std::vector<TrainedModel> train_one_vs_all_supervised(const LabeledDataset& data,
                                                      const MethodConfig& cfg) {
  data.validate();
  if (data.num_classes < 2)
    throw ConfigError("one-vs-all training needs at least two classes");
  std::vector<TrainedModel> models;
  models.reserve(static_cast<size_t>(data.num_classes));
  for (int c = 1; c <= data.num_classes; ++c)
    models.push_back(train_supervised_binary(data, cfg, Method::supervised_dl, c));
  return models;
}

TrainedModel train_supervised_multiclass(const LabeledDataset& data,
                                         const MethodConfig& cfg) {
  TrainedModel model;
  model.submodels = train_one_vs_all_supervised(data, cfg);
  model.method = Method::supervised_dl;
  model.resolved = Method::supervised_dl;
  model.num_classes = data.num_classes;
  model.dictionary = model.submodels.front().dictionary;
  model.config = model.submodels.front().config;
  model.trace = model.submodels.front().trace;
  return model;
}

TrainedModel train_dksvd(const LabeledDataset& data, const MethodConfig& cfg) {
  MethodConfig resolved = cfg;
  const double regression = cfg.lambda1.value_or(1.0);
  const double sparsity = detail::resolve_sparsity_weight(cfg.lambda2, data.signals);
  resolved.lambda1 = regression;
  resolved.lambda2 = sparsity;
  resolved.lambda3 = cfg.lambda3.value_or(1.0);  // dropped during optimization
  TrainedModel model =
      train_stacked(data, resolved, Method::dksvd, 0.0, regression, sparsity, false);
  model.resolved = Method::dksvd;
  return model;
}

TrainedModel train_lcksvd(const LabeledDataset& data, const MethodConfig& cfg) {
  MethodConfig resolved = cfg;
  const double consistency = cfg.lambda1.value_or(1.0);
  const double regression = cfg.lambda2.value_or(1.0);
  const double sparsity = detail::resolve_sparsity_weight(cfg.lambda3, data.signals);
  resolved.lambda1 = consistency;
  resolved.lambda2 = regression;
  resolved.lambda3 = sparsity;
  TrainedModel model = train_stacked(data, resolved, Method::lcksvd, consistency,
                                     regression, sparsity, true);
  model.resolved = Method::lcksvd;
  return model;
}

TrainedModel train_fddl(const LabeledDataset& data, const MethodConfig& cfg) {
  return train_fddl_core(data, cfg, Method::fddl);
}

TrainedModel train_unified(const LabeledDataset& data, const MethodConfig& cfg) {
  const UnifiedTerms& terms = cfg.unified;
  TrainedModel model;

  if (terms.fidelity == FidelityKind::per_class &&
      terms.discrimination == DiscriminationKind::none) {
    model = train_track1(data, cfg, Method::unified, cfg.eta.value_or(0.0));
  } else if (terms.fidelity == FidelityKind::plain &&
             terms.discrimination == DiscriminationKind::none) {
    MethodConfig resolved = cfg;
    const double sparsity = detail::resolve_sparsity_weight(cfg.lambda, data.signals);
    resolved.lambda = sparsity;
    model = train_stacked(data, resolved, Method::unified, 0.0, 0.0, sparsity,
                          false);
  } else if (terms.fidelity == FidelityKind::plain &&
             terms.discrimination == DiscriminationKind::linear_regression) {
    MethodConfig resolved = cfg;
    const double regression = cfg.lambda1.value_or(1.0);
    const double sparsity = detail::resolve_sparsity_weight(cfg.lambda2, data.signals);
    resolved.lambda1 = regression;
    resolved.lambda2 = sparsity;
    model = train_stacked(data, resolved, Method::unified, 0.0, regression,
                          sparsity, false);
    model.resolved = Method::dksvd;
  } else if (terms.fidelity == FidelityKind::plain &&
             terms.discrimination == DiscriminationKind::label_consistent) {
    if (cfg.atoms_per_class < 1)
      throw ConfigError(
          "the label-consistency term requires an atom-class assignment "
          "(set atoms_per_class)");
    MethodConfig resolved = cfg;
    const double consistency = cfg.lambda1.value_or(1.0);
    const double regression = cfg.lambda2.value_or(1.0);
    const double sparsity = detail::resolve_sparsity_weight(cfg.lambda3, data.signals);
    resolved.lambda1 = consistency;
    resolved.lambda2 = regression;
    resolved.lambda3 = sparsity;
    model = train_stacked(data, resolved, Method::unified, consistency, regression,
                          sparsity, true);
    model.resolved = Method::lcksvd;
  } else if (terms.fidelity == FidelityKind::plain &&
             terms.discrimination == DiscriminationKind::logistic) {
    if (data.num_classes == 2)
      model = train_supervised_binary(data, cfg, Method::unified, 1);
    else {
      model = train_supervised_multiclass(data, cfg);
      model.method = Method::unified;
    }
    model.resolved = Method::supervised_dl;
  } else if (terms.fidelity == FidelityKind::discriminative &&
             terms.discrimination == DiscriminationKind::fisher) {
    model = train_fddl_core(data, cfg, Method::unified);
  } else {
    throw ConfigError("unsupported term combination for the unified trainer");
  }

  model.method = Method::unified;
  return model;
}

TrainedModel make_src_model(const LabeledDataset& data) {
  data.validate();
  require_nonempty_classes(data);

  Matrix atoms(data.dim(), data.size());
  std::vector<int> atom_class;
  atom_class.reserve(static_cast<size_t>(data.size()));
  Index col = 0;
  for (int c = 1; c <= data.num_classes; ++c) {
    for (Index n : data.class_columns(c)) {
      atoms.col(col++) = data.signals.col(n);
      atom_class.push_back(c);
    }
  }

  TrainedModel model;
  model.dictionary = Dictionary(std::move(atoms), std::move(atom_class));
  model.method = Method::src;
  model.resolved = Method::src;
  model.num_classes = data.num_classes;
  model.config.method = Method::src;
  model.trace.objective = {0.0};
  model.trace.reason = TrainingTrace::Termination::converged;
  return model;
}

namespace detail {

LogisticFitResult fit_logistic_classifier(const Matrix& signals, const Matrix& codes,
                                          const Vector& margins, double ridge,
                                          ClassifierForm form, const Matrix& init_weights,
                                          double init_bias) {
  LogisticDesign design;
  design.form = form;
  design.weights = init_weights;
  design.bias = init_bias;

  LogisticFitResult result;
  result.loss_before = logistic_data_loss(design, signals, codes, margins);
  update_classifier(design, signals, codes, margins, ridge);
  result.loss_after = logistic_data_loss(design, signals, codes, margins);
  result.weights = design.weights;
  result.bias = design.bias;
  return result;
}

} // namespace detail

TrainedModel train(const LabeledDataset& data, const MethodConfig& cfg) {
  switch (cfg.method) {
    case Method::src: return make_src_model(data);
    case Method::metaface: return train_metaface(data, cfg);
    case Method::dlsi: return train_dlsi(data, cfg);
    case Method::supervised_dl: return train_supervised_multiclass(data, cfg);
    case Method::dksvd: return train_dksvd(data, cfg);
    case Method::lcksvd: return train_lcksvd(data, cfg);
    case Method::fddl: return train_fddl(data, cfg);
    case Method::unified: return train_unified(data, cfg);
  }
  throw ConfigError("unknown method tag");
}

} // namespace ddl
