#include "ddl/sparse_coding.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <random>

#include "parallel.hpp"

namespace ddl {

void SolverOptions::validate() const {
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (!(kkt_tolerance > 0)) throw ConfigError("kkt_tolerance must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
}

void SparseCodeProblem::validate() const {
  if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  if (dictionary.cols() < 1) throw DataError("dictionary has no atoms");
  if (signal.size() != dictionary.rows())
    throw DataError("signal length " + std::to_string(signal.size()) +
                    " does not match dictionary row count " +
                    std::to_string(dictionary.rows()));
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double lasso_objective(const Eigen::Ref<const Matrix>& D,
                       const Eigen::Ref<const Vector>& x, double lambda,
                       const Eigen::Ref<const Vector>& a) {
  return (x - D * a).squaredNorm() + lambda * a.lpNorm<1>();
}

double lasso_kkt_residual(const Eigen::Ref<const Matrix>& D,
                          const Eigen::Ref<const Vector>& x, double lambda,
                          const Eigen::Ref<const Vector>& a) {
  const Vector corr = 2.0 * (D.transpose() * (x - D * a));
  double worst = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    double v;
    if (a[j] > 0)
      v = std::abs(corr[j] - lambda);
    else if (a[j] < 0)
      v = std::abs(corr[j] + lambda);
    else
      v = std::max(0.0, std::abs(corr[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

double gram_spectral_norm(const Eigen::Ref<const Matrix>& D) {
  // Power iteration on the smaller Gram matrix; D^T D and D D^T share their
  // top eigenvalue.
  const bool tall = D.rows() >= D.cols();
  const Index n = tall ? D.cols() : D.rows();
  if (n == 0) return 0.0;

  std::mt19937 rng(123456789u);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = unif(rng);
  const double v0 = v.norm();
  if (v0 == 0) return 0.0;
  v /= v0;

  double lambda_prev = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vector w = tall ? Vector(D.transpose() * (D * v)) : Vector(D * (D.transpose() * v));
    const double norm = w.norm();
    if (norm == 0) return 0.0;  // v in the null space; D essentially zero
    v = w / norm;
    const double lambda = tall ? (D * v).squaredNorm() : (D.transpose() * v).squaredNorm();
    if (std::abs(lambda - lambda_prev) <= 1e-8 * std::max(1.0, lambda)) return lambda;
    lambda_prev = lambda;
  }
  return lambda_prev;
}

namespace {

// One proximal step from y with step size s; shrinks s until the quadratic
// majorization holds when backtracking is enabled.
Vector proximal_step(const Eigen::Ref<const Matrix>& D,
                     const Eigen::Ref<const Vector>& x, double lambda,
                     const Vector& y, const Vector& grad, double fy, double& s,
                     StepRule rule) {
  for (;;) {
    Vector z(y.size());
    for (Index j = 0; j < y.size(); ++j)
      z[j] = soft_threshold(y[j] - s * grad[j], s * lambda);
    if (rule == StepRule::fixed) return z;
    const Vector diff = z - y;
    const double fz = (x - D * z).squaredNorm();
    if (fz <= fy + grad.dot(diff) + diff.squaredNorm() / (2.0 * s) + 1e-12)
      return z;
    s *= 0.5;
    if (s < 1e-300) return z;
  }
}

Vector solve_proximal_gradient(const Eigen::Ref<const Matrix>& D,
                               const Eigen::Ref<const Vector>& x, double lambda,
                               const SolverOptions& opts, double& residual_out) {
  const Index K = D.cols();
  const double top = gram_spectral_norm(D);
  Vector a = Vector::Zero(K);
  if (top <= 0) {  // all-zero dictionary: a = 0 is optimal
    residual_out = lasso_kkt_residual(D, x, lambda, a);
    return a;
  }
  // Margin over the power-iteration estimate, which converges from below.
  double step = 1.0 / (2.0 * top * 1.01);

  Vector y = a;
  double t = 1.0;
  double fa = lasso_objective(D, x, lambda, a);
  if (opts.objective_trace) opts.objective_trace->push_back(fa);

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vector ry = x - D * y;
    const Vector grad = -2.0 * (D.transpose() * ry);
    double s = step;
    Vector z = proximal_step(D, x, lambda, y, grad, ry.squaredNorm(), s, opts.step_rule);
    if (opts.step_rule == StepRule::backtracking) step = s;
    const double fz = lasso_objective(D, x, lambda, z);

    if (fz <= fa) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z + ((t - 1.0) / t_next) * (z - a);
      a = z;
      fa = fz;
      t = t_next;
    } else {
      // Momentum overshot: restart from the best iterate with a plain step,
      // which cannot increase the objective at a valid step size.
      const Vector ra = x - D * a;
      const Vector grad_a = -2.0 * (D.transpose() * ra);
      double s2 = step;
      Vector z2 = proximal_step(D, x, lambda, a, grad_a, ra.squaredNorm(), s2, opts.step_rule);
      if (opts.step_rule == StepRule::backtracking) step = s2;
      const double fz2 = lasso_objective(D, x, lambda, z2);
      // The objective is flat to machine precision near the optimum; a valid
      // plain step cannot truly increase it, so ulp-level upticks are rounding
      // and the step should still be taken to keep the KKT residual shrinking.
      const double ulp_slack =
          8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fa));
      if (fz2 <= fa + ulp_slack) {
        a = z2;
        fa = fz2;
      } else if (opts.step_rule == StepRule::fixed) {
        step *= 0.5;  // a genuinely stale spectral estimate
      }
      y = a;
      t = 1.0;
    }

    if (opts.objective_trace) opts.objective_trace->push_back(fa);
    const double res = lasso_kkt_residual(D, x, lambda, a);
    if (res <= opts.kkt_tolerance) {
      residual_out = res;
      return a;
    }
  }
  residual_out = lasso_kkt_residual(D, x, lambda, a);
  throw SolverError("lasso proximal gradient did not converge in " +
                        std::to_string(opts.max_iterations) +
                        " iterations (KKT residual " + std::to_string(residual_out) + ")",
                    residual_out);
}

// Exact solve on the current sign pattern. Near-parallel atoms make plain
// coordinate sweeps creep, but once the support is stable the stationarity
// system on it is a small linear solve. The polished point is the minimum of
// the objective over the orthant containing `a`, so accepting it never
// increases the objective.
// Attempts one exact finish on the current sign pattern, treating gram
// eigenvalues below `rank_cut` (relative) as zero. Returns the candidate via
// `out`; the caller validates it.
bool polish_candidate(const Eigen::Ref<const Matrix>& D,
                      const Eigen::Ref<const Vector>& x, double lambda,
                      const Vector& a, double rank_cut, Vector& out) {
  std::vector<Index> support;
  std::vector<double> signs, values;
  for (Index j = 0; j < a.size(); ++j)
    if (a[j] != 0.0) {
      support.push_back(j);
      signs.push_back(a[j] > 0 ? 1.0 : -1.0);
      values.push_back(a[j]);
    }
  if (support.empty()) {
    out = Vector::Zero(a.size());
    return true;
  }
  if (static_cast<Index>(support.size()) > 192) return false;

  // Stationarity solve on the sign pattern via a truncated eigenbasis.
  // Wrong-signed solutions leave the support. If the right-hand side needs
  // discarded (flat) directions, no stationary point exists on the pattern:
  // the objective decreases along the flat direction until a coefficient
  // crosses zero, so slide there and drop it. Both branches shrink the
  // support, so the loop terminates.
  bool solved_clean = false;
  while (!support.empty()) {
    const Index m = static_cast<Index>(support.size());
    Matrix sub(D.rows(), m);
    Vector sign_vec(m);
    for (Index i = 0; i < m; ++i) {
      sub.col(i) = D.col(support[static_cast<size_t>(i)]);
      sign_vec[i] = signs[static_cast<size_t>(i)];
    }
    const Matrix gram = sub.transpose() * sub;
    const Vector rhs = sub.transpose() * x - 0.5 * lambda * sign_vec;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) return false;
    const double eval_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double cut = rank_cut * std::max(eval_max, 1e-30);
    const Vector beta = eig.eigenvectors().transpose() * rhs;

    double flat_mass = 0.0;
    Vector solved_basis(m);
    for (Index i = 0; i < m; ++i) {
      if (eig.eigenvalues()[i] > cut) {
        solved_basis[i] = beta[i] / eig.eigenvalues()[i];
      } else {
        solved_basis[i] = 0.0;
        flat_mass = std::max(flat_mass, std::abs(beta[i]));
      }
    }

    if (flat_mass <= 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      const Vector solved = eig.eigenvectors() * solved_basis;
      std::vector<Index> kept;
      std::vector<double> kept_signs, kept_values;
      for (Index i = 0; i < m; ++i) {
        if (solved[i] * sign_vec[i] > 0) {
          kept.push_back(support[static_cast<size_t>(i)]);
          kept_signs.push_back(sign_vec[i]);
          kept_values.push_back(solved[i]);
        }
      }
      if (kept.size() == support.size()) {
        values = std::move(kept_values);
        solved_clean = true;
        break;
      }
      support = std::move(kept);
      signs = std::move(kept_signs);
      values = std::move(kept_values);
      continue;
    }

    if (lambda <= 0) return false;
    Vector direction = Vector::Zero(m);
    for (Index i = 0; i < m; ++i)
      if (eig.eigenvalues()[i] <= cut) {
        const Vector basis = eig.eigenvectors().col(i);
        direction -= basis * basis.dot(sign_vec);
      }
    if (direction.cwiseAbs().maxCoeff() < 1e-14) return false;
    if (direction.dot(sign_vec) > 0) direction = -direction;

    double step_limit = 0.0;
    Index leaving = -1;
    for (Index i = 0; i < m; ++i) {
      if (direction[i] * sign_vec[i] < 0) {
        const double t = values[static_cast<size_t>(i)] / -direction[i];
        if (leaving < 0 || std::abs(t) < step_limit) {
          step_limit = std::abs(t);
          leaving = i;
        }
      }
    }
    if (leaving < 0) return false;

    std::vector<Index> kept;
    std::vector<double> kept_signs, kept_values;
    for (Index i = 0; i < m; ++i) {
      const double moved = values[static_cast<size_t>(i)] + step_limit * direction[i];
      if (i == leaving || moved * sign_vec[i] <= 0) continue;
      kept.push_back(support[static_cast<size_t>(i)]);
      kept_signs.push_back(sign_vec[i]);
      kept_values.push_back(moved);
    }
    if (kept.size() >= support.size()) return false;
    support = std::move(kept);
    signs = std::move(kept_signs);
    values = std::move(kept_values);
  }
  if (!solved_clean && !support.empty()) return false;

  out = Vector::Zero(a.size());
  for (size_t i = 0; i < support.size(); ++i) out[support[i]] = values[i];
  return true;
}

bool active_set_polish(const Eigen::Ref<const Matrix>& D,
                       const Eigen::Ref<const Vector>& x, double lambda,
                       Vector& a, double tolerance, double& residual_out) {
  const double before = lasso_objective(D, x, lambda, a);
  for (double rank_cut : {1e-12, 1e-7}) {
    Vector candidate;
    if (!polish_candidate(D, x, lambda, a, rank_cut, candidate)) continue;
    if (lasso_objective(D, x, lambda, candidate) >
        before + 1e-12 * std::max(1.0, before))
      continue;
    const double res = lasso_kkt_residual(D, x, lambda, candidate);
    if (res <= tolerance) {
      a = candidate;
      residual_out = res;
      return true;
    }
    if (lasso_objective(D, x, lambda, candidate) < before) a = candidate;
  }
  return false;
}

Vector solve_coordinate_descent(const Eigen::Ref<const Matrix>& D,
                                const Eigen::Ref<const Vector>& x, double lambda,
                                const SolverOptions& opts, double& residual_out) {
  const Index K = D.cols();
  Vector a = Vector::Zero(K);
  Vector col_sq(K);
  for (Index j = 0; j < K; ++j) col_sq[j] = D.col(j).squaredNorm();

  Vector r = x;  // running residual x - D a
  if (opts.objective_trace)
    opts.objective_trace->push_back(lasso_objective(D, x, lambda, a));

  for (int sweep = 0; sweep < opts.max_iterations; ++sweep) {
    for (Index j = 0; j < K; ++j) {
      if (col_sq[j] == 0) continue;  // zero atom never activates
      const double rho = D.col(j).dot(r) + col_sq[j] * a[j];
      const double aj = soft_threshold(rho, 0.5 * lambda) / col_sq[j];
      if (aj != a[j]) {
        r += D.col(j) * (a[j] - aj);
        a[j] = aj;
      }
    }
    if (opts.objective_trace)
      opts.objective_trace->push_back(lasso_objective(D, x, lambda, a));
    const double res = lasso_kkt_residual(D, x, lambda, a);
    if (res <= opts.kkt_tolerance) {
      residual_out = res;
      return a;
    }
    if (sweep % 16 == 15) {
      double polished = res;
      if (active_set_polish(D, x, lambda, a, opts.kkt_tolerance, polished)) {
        residual_out = polished;
        return a;
      }
      r = x - D * a;  // the polish may have moved a
    }
  }
  residual_out = lasso_kkt_residual(D, x, lambda, a);
  throw SolverError("lasso coordinate descent did not converge in " +
                        std::to_string(opts.max_iterations) +
                        " sweeps (KKT residual " + std::to_string(residual_out) + ")",
                    residual_out);
}

} // namespace

Vector lasso_solve(const SparseCodeProblem& problem, const SolverOptions& opts) {
  problem.validate();
  opts.validate();
  double residual = 0.0;
  if (opts.algorithm == LassoAlgorithm::proximal_gradient)
    return solve_proximal_gradient(problem.dictionary, problem.signal,
                                   problem.lambda, opts, residual);
  return solve_coordinate_descent(problem.dictionary, problem.signal,
                                  problem.lambda, opts, residual);
}

Vector lasso_solve(const Eigen::Ref<const Matrix>& dictionary,
                   const Eigen::Ref<const Vector>& signal, double lambda,
                   const SolverOptions& opts) {
  return lasso_solve(SparseCodeProblem{dictionary, signal, lambda}, opts);
}

Matrix batch_sparse_code(const Eigen::Ref<const Matrix>& dictionary,
                         const Eigen::Ref<const Matrix>& signals, double lambda,
                         const SolverOptions& opts) {
  if (signals.rows() != dictionary.rows())
    throw DataError("signal rows do not match dictionary rows");
  opts.validate();

  SolverOptions col_opts = opts;
  col_opts.objective_trace = nullptr;  // traces are per-problem only
  col_opts.threads = 1;

  Matrix codes(dictionary.cols(), signals.cols());
  detail::parallel_for(signals.cols(), opts.threads, [&](Index i) {
    try {
      codes.col(i) = lasso_solve(dictionary, signals.col(i), lambda, col_opts);
    } catch (const SolverError& e) {
      throw SolverError("column " + std::to_string(i) + ": " + e.what(),
                        e.kkt_residual, i);
    }
  });
  return codes;
}

} // namespace ddl
