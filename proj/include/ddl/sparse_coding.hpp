#ifndef DDL_SPARSE_CODING_HPP
#define DDL_SPARSE_CODING_HPP

#include "ddl/types.hpp"

#include <vector>

namespace ddl {

enum class StepRule { fixed, backtracking };
enum class LassoAlgorithm { proximal_gradient, coordinate_descent };

struct SolverOptions {
  int max_iterations = 20000;
  double kkt_tolerance = 1e-8;
  StepRule step_rule = StepRule::fixed;
  LassoAlgorithm algorithm = LassoAlgorithm::coordinate_descent;
  int threads = 1;  // column-level parallelism in batch calls

  // When set, the per-iteration objective values are appended here
  // (single-problem calls only).
  std::vector<double>* objective_trace = nullptr;

  void validate() const;
};

/// One l1-regularized least-squares instance
///   min_a ||signal - dictionary * a||_2^2 + lambda * ||a||_1.
struct SparseCodeProblem {
  Eigen::Ref<const Matrix> dictionary;  // d x K
  Eigen::Ref<const Vector> signal;      // d
  double lambda = 0.0;

  void validate() const;
};

/// Proximal operator of t*|.|: sign(v) * max(|v| - t, 0).
double soft_threshold(double v, double t);

/// Objective ||x - D a||_2^2 + lambda ||a||_1 at a.
double lasso_objective(const Eigen::Ref<const Matrix>& dictionary,
                       const Eigen::Ref<const Vector>& signal, double lambda,
                       const Eigen::Ref<const Vector>& code);

/// Max KKT violation of the lasso stationarity conditions at `code`:
/// 2 d_j^T (x - D a) must equal lambda*sign(a_j) on the support and stay
/// within [-lambda, lambda] off it.
double lasso_kkt_residual(const Eigen::Ref<const Matrix>& dictionary,
                          const Eigen::Ref<const Vector>& signal, double lambda,
                          const Eigen::Ref<const Vector>& code);

/// Largest eigenvalue of D^T D, estimated by power iteration
/// (50 iterations, tolerance 1e-8).
double gram_spectral_norm(const Eigen::Ref<const Matrix>& dictionary);

/// Solves the problem to KKT tolerance. Throws SolverError (carrying the
/// final KKT residual) when max_iterations is exhausted first.
Vector lasso_solve(const SparseCodeProblem& problem, const SolverOptions& opts = {});
Vector lasso_solve(const Eigen::Ref<const Matrix>& dictionary,
                   const Eigen::Ref<const Vector>& signal, double lambda,
                   const SolverOptions& opts = {});

/// Codes every column of `signals` independently; column i of the result is
/// lasso_solve on signal i. Per-column failures are rethrown with the column
/// index attached.
Matrix batch_sparse_code(const Eigen::Ref<const Matrix>& dictionary,
                         const Eigen::Ref<const Matrix>& signals, double lambda,
                         const SolverOptions& opts = {});

} // namespace ddl

#endif
