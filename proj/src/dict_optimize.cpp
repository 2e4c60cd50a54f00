#include "ddl/dict_optimize.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ddl {

Matrix project_columns(Matrix m) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double norm = m.col(j).norm();
    if (norm > 1.0) m.col(j) /= norm;
  }
  return m;
}

namespace {

// Columns of `pool` ranked worst-reconstructed first, by the residual norms
// in `residual`.
std::vector<Index> worst_columns(const Matrix& residual) {
  std::vector<Index> order(static_cast<size_t>(residual.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return residual.col(a).squaredNorm() > residual.col(b).squaredNorm();
  });
  return order;
}

} // namespace

Dictionary update_dictionary_ls(const Matrix& signals, const Matrix& codes,
                                const Dictionary& init) {
  return update_dictionary_ls_sum({{&signals, &codes}}, init);
}

Dictionary update_dictionary_ls_sum(const std::vector<DictionaryFitTerm>& terms,
                                    const Dictionary& init,
                                    const Matrix* replacement_pool) {
  if (terms.empty()) throw ConfigError("dictionary update needs at least one fit term");
  const Index K = init.size();
  for (const auto& t : terms) {
    if (t.codes->rows() != K)
      throw DataError("code rows do not match the atom count");
    if (t.target->cols() != t.codes->cols() || t.target->rows() != init.dim())
      throw DataError("fit term dimensions disagree with the dictionary");
  }

  Dictionary dict = init;
  Matrix& D = dict.atoms;

  std::vector<Matrix> residuals;
  residuals.reserve(terms.size());
  for (const auto& t : terms) residuals.push_back(*t.target - D * (*t.codes));

  std::vector<Index> dead;
  for (Index j = 0; j < K; ++j) {
    double weight = 0.0;
    for (const auto& t : terms) weight += t.codes->row(j).squaredNorm();
    if (weight == 0.0) {
      dead.push_back(j);
      continue;
    }
    Vector numer = Vector::Zero(init.dim());
    for (size_t t = 0; t < terms.size(); ++t)
      numer.noalias() += residuals[t] * terms[t].codes->row(j).transpose();
    Vector candidate = numer / weight + D.col(j);
    const double norm = candidate.norm();
    if (norm > 1.0) candidate /= norm;
    for (size_t t = 0; t < terms.size(); ++t)
      residuals[t].noalias() += (D.col(j) - candidate) * terms[t].codes->row(j);
    D.col(j) = candidate;
  }

  if (!dead.empty()) {
    // Unused atoms contribute nothing to the fit; reseed them from the
    // worst-reconstructed columns so they become useful next iteration.
    const Matrix& pool = replacement_pool ? *replacement_pool : *terms[0].target;
    const Matrix& pool_residual = residuals[0];
    const auto order = worst_columns(pool_residual);
    size_t next = 0;
    for (Index j : dead) {
      if (order.empty()) break;
      const Index col = order[next % order.size()];
      ++next;
      if (col >= pool.cols()) continue;
      const double norm = pool.col(col).norm();
      if (norm > 0) D.col(j) = pool.col(col) / norm;
    }
  }
  return dict;
}

Vector minimize_quadratic_on_ball(const Matrix& quad, const Vector& lin) {
  const Index n = lin.size();
  if (quad.rows() != n || quad.cols() != n)
    throw DataError("quadratic term shape does not match the linear term");
  if (lin.isZero(0.0)) return Vector::Zero(n);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(quad);
  const Vector& evals = eig.eigenvalues();
  const Matrix& basis = eig.eigenvectors();
  const Vector beta = basis.transpose() * lin;

  const double lambda_max = std::max(0.0, evals.maxCoeff());
  const double eps = 1e-13 * std::max(1.0, lambda_max);

  auto coords = [&](double mu) {
    Vector c(n);
    for (Index i = 0; i < n; ++i) {
      const double denom = std::max(evals[i], 0.0) + mu;
      c[i] = denom > eps ? beta[i] / denom : 0.0;
    }
    return c;
  };

  // Interior solution when H is positive definite on the support of beta.
  bool interior_defined = true;
  for (Index i = 0; i < n; ++i)
    if (std::abs(beta[i]) > eps && evals[i] <= eps) interior_defined = false;
  if (interior_defined) {
    const Vector c = coords(0.0);
    if (c.squaredNorm() <= 1.0) return basis * c;
  }

  // Boundary solution: bisect the multiplier of the norm constraint.
  double lo = 0.0, hi = beta.norm();
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (coords(mid).squaredNorm() > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  Vector d = basis * coords(hi);
  const double norm = d.norm();
  if (norm > 1.0) d /= norm;
  return d;
}

Dictionary update_dictionary_incoherent(const Matrix& signals, const Matrix& codes,
                                        const Dictionary& init,
                                        const std::vector<const Matrix*>& other_dicts,
                                        double eta) {
  if (eta < 0) throw ConfigError("incoherence weight must be nonnegative");
  bool has_penalty = eta > 0;
  if (has_penalty) {
    has_penalty = false;
    for (const auto* m : other_dicts)
      if (m && m->size() > 0) has_penalty = true;
  }
  if (!has_penalty) return update_dictionary_ls(signals, codes, init);

  const Index d_rows = init.dim();
  Matrix cross = Matrix::Zero(d_rows, d_rows);  // eta * sum_j D_j D_j^T
  for (const auto* m : other_dicts) {
    if (!m || m->size() == 0) continue;
    if (m->rows() != d_rows)
      throw DataError("other dictionary row dimension mismatch");
    cross.noalias() += eta * (*m) * m->transpose();
  }

  Dictionary dict = init;
  Matrix& D = dict.atoms;
  Matrix residual = signals - D * codes;

  std::vector<Index> dead;
  for (Index j = 0; j < D.cols(); ++j) {
    const double weight = codes.row(j).squaredNorm();
    if (weight == 0.0) {
      dead.push_back(j);
      continue;
    }
    const Vector lin = residual * codes.row(j).transpose() + weight * D.col(j);
    Matrix quad = cross;
    quad.diagonal().array() += weight;
    const Vector candidate = minimize_quadratic_on_ball(quad, lin);
    residual.noalias() += (D.col(j) - candidate) * codes.row(j);
    D.col(j) = candidate;
  }

  if (!dead.empty()) {
    // Replacement leaves the fit untouched (the coefficient row is zero) but
    // may raise the incoherence penalty; accept only when it does not.
    const auto order = worst_columns(residual);
    size_t next = 0;
    for (Index j : dead) {
      if (order.empty()) break;
      const Index col = order[next % order.size()];
      ++next;
      const double norm = signals.col(col).norm();
      if (norm <= 0) continue;
      const Vector candidate = signals.col(col) / norm;
      const double penalty_old = D.col(j).dot(cross * D.col(j));
      const double penalty_new = candidate.dot(cross * candidate);
      if (penalty_new <= penalty_old) D.col(j) = candidate;
    }
  }
  return dict;
}

void AlternationSchedule::validate() const {
  if (max_outer_iterations < 1)
    throw ConfigError("max_outer_iterations must be positive");
  if (!(relative_tolerance >= 0))
    throw ConfigError("relative_tolerance must be nonnegative");
}

TrainingTrace alternate_minimize(const std::vector<BlockUpdate>& blocks,
                                 const std::function<double()>& objective,
                                 const AlternationSchedule& schedule) {
  schedule.validate();
  constexpr double kSlack = 1e-8;

  TrainingTrace trace;
  double current = objective();
  trace.objective.push_back(current);

  for (int outer = 0; outer < schedule.max_outer_iterations; ++outer) {
    for (const auto& block : blocks) {
      block.apply();
      const double value = objective();
      if (value > current + kSlack)
        throw MonotonicityError("block '" + block.name +
                                    "' increased the objective by " +
                                    std::to_string(value - current),
                                block.name, value - current);
      current = value;
    }
    const double previous = trace.objective.back();
    trace.objective.push_back(current);
    if (std::abs(previous - current) <=
        schedule.relative_tolerance * std::max(1.0, std::abs(previous))) {
      trace.reason = TrainingTrace::Termination::converged;
      return trace;
    }
  }
  trace.reason = TrainingTrace::Termination::max_iterations;
  return trace;
}

} // namespace ddl
