#ifndef DDL_DICT_OPTIMIZE_HPP
#define DDL_DICT_OPTIMIZE_HPP

#include "ddl/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ddl {

/// Projects every column onto the unit l2 ball: c -> c / max(1, ||c||).
Matrix project_columns(Matrix m);

/// One pass of block coordinate descent over atoms for
///   min_D ||X - D A||_F^2   s.t. unit-ball columns,
/// using the exact per-column minimizer (ball projection is exact here).
/// Atoms whose coefficient row is all zero are replaced by the
/// worst-reconstructed data column, normalized.
Dictionary update_dictionary_ls(const Matrix& signals, const Matrix& codes,
                                const Dictionary& init);

/// Same update for a sum of quadratic fits sharing one dictionary:
///   min_D sum_t ||targets[t] - D code_blocks[t]||_F^2.
/// Dead-atom replacement draws from `signals` (the first target when null)
/// and is applied only when it does not increase the objective.
struct DictionaryFitTerm {
  const Matrix* target;  // d x N_t
  const Matrix* codes;   // K x N_t
};
Dictionary update_dictionary_ls_sum(const std::vector<DictionaryFitTerm>& terms,
                                    const Dictionary& init,
                                    const Matrix* replacement_pool = nullptr);

/// Block coordinate descent for the incoherence-penalized fit
///   min_D ||X - D A||_F^2 + eta * sum_j ||D^T other_dicts[j]||_F^2
/// under the unit-ball constraint. Exact per-column minimization (a ball
/// constrained quadratic), so the block objective never increases.
Dictionary update_dictionary_incoherent(const Matrix& signals, const Matrix& codes,
                                        const Dictionary& init,
                                        const std::vector<const Matrix*>& other_dicts,
                                        double eta);

/// Exact minimizer of d^T H d - 2 b^T d over ||d|| <= 1 for PSD H.
Vector minimize_quadratic_on_ball(const Matrix& quad, const Vector& lin);

// ---------------------------------------------------------------------------
// Alternating minimization driver
// ---------------------------------------------------------------------------

struct BlockUpdate {
  std::string name;
  std::function<void()> apply;  // mutates the trainer state it captured
};

struct AlternationSchedule {
  int max_outer_iterations = 100;
  double relative_tolerance = 1e-5;

  void validate() const;
};

/// Runs the registered block updates in order until the relative objective
/// change over one outer iteration drops below tolerance or the iteration
/// budget is exhausted. Every block must be non-increasing for the composite
/// objective; an increase beyond 1e-8 slack raises MonotonicityError naming
/// the block.
TrainingTrace alternate_minimize(const std::vector<BlockUpdate>& blocks,
                                 const std::function<double()>& objective,
                                 const AlternationSchedule& schedule);

} // namespace ddl

#endif
