#ifndef DDL_TYPES_HPP
#define DDL_TYPES_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all library failures.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, bad option value, missing required parameter.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input data: files, dimension mismatches, label ranges.
class DataError : public Error {
public:
  using Error::Error;
};

/// An iterative solver failed to reach its stopping criterion.
class SolverError : public Error {
public:
  SolverError(const std::string& what, double kkt_residual, Index column = -1)
      : Error(what), kkt_residual(kkt_residual), column(column) {}

  double kkt_residual;  // residual at the last iterate
  Index column;         // offending column in a batch call, -1 otherwise
};

/// A block update increased the composite objective beyond the allowed slack.
class MonotonicityError : public Error {
public:
  MonotonicityError(const std::string& what, std::string block, double increase)
      : Error(what), block(std::move(block)), increase(increase) {}

  std::string block;
  double increase;
};

// ---------------------------------------------------------------------------
// Core data types
// ---------------------------------------------------------------------------

/// A d x K atom matrix. Learned dictionaries keep every column inside the
/// unit l2 ball. When atom_class is non-empty the dictionary is structured:
/// atom_class[k] gives the 1-based class of atom k and atoms of one class
/// occupy a contiguous column range.
struct Dictionary {
  Matrix atoms;
  std::vector<int> atom_class;

  Dictionary() = default;
  explicit Dictionary(Matrix m) : atoms(std::move(m)) {}
  Dictionary(Matrix m, std::vector<int> classes)
      : atoms(std::move(m)), atom_class(std::move(classes)) {}

  Index dim() const { return atoms.rows(); }
  Index size() const { return atoms.cols(); }
  bool structured() const { return !atom_class.empty(); }

  int num_classes() const;

  /// Column range [offset, offset+count) of class c atoms. Throws DataError
  /// if the dictionary is unstructured.
  std::pair<Index, Index> class_block(int c) const;
  Matrix class_atoms(int c) const;

  /// Checks the unit-ball column invariant and atom_class consistency.
  void validate() const;
};

/// Signals with 1-based class labels.
struct LabeledDataset {
  Matrix signals;           // d x N, one signal per column
  std::vector<int> labels;  // size N, values in 1..num_classes
  int num_classes = 0;

  Index dim() const { return signals.rows(); }
  Index size() const { return signals.cols(); }

  std::vector<Index> class_columns(int c) const;
  Matrix class_matrix(int c) const;
  Index class_count(int c) const;

  void validate() const;
};

/// Per-outer-iteration objective values recorded by the alternation driver.
/// objective[0] is the value at the initial state.
struct TrainingTrace {
  enum class Termination { converged, max_iterations };

  std::vector<double> objective;
  Termination reason = Termination::max_iterations;

  double initial() const { return objective.front(); }
  double final() const { return objective.back(); }
};

} // namespace ddl

#endif
