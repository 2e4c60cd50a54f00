#ifndef DDL_DISCRIMINATORS_HPP
#define DDL_DISCRIMINATORS_HPP

#include "ddl/types.hpp"

#include <optional>
#include <vector>

namespace ddl {

/// C x N one-hot label matrix: H(c-1, n) = 1 iff labels[n] == c.
Matrix build_label_indicator(const std::vector<int>& labels, int num_classes);

/// K x N binary matrix pairing atoms with signals of the same class:
/// Q(k, n) = 1 iff atom_class[k] == labels[n].
Matrix build_consistency_matrix(const std::vector<int>& labels,
                                const std::vector<int>& atom_class);

/// log(1 + exp(-margin)), evaluated on the numerically safe side.
double logistic_loss(double margin);

/// ||D_i^T D_j||_F^2, the structured-incoherence penalty between two
/// dictionaries sharing a row dimension.
double incoherence_penalty(const Matrix& dict_a, const Matrix& dict_b);

/// Within- and between-class scatter of a code matrix. The between-class
/// scatter uses unweighted class-mean deviations and the global mean is the
/// mean over all columns.
struct ScatterPair {
  Matrix within;        // K x K
  Matrix between;       // K x K
  Matrix class_means;   // K x C
  Vector global_mean;   // K
};
ScatterPair scatter_matrices(const Matrix& codes, const std::vector<int>& labels,
                             int num_classes);

/// Fisher discrimination value tr(S_W) - tr(S_B) + eta * ||A||_F^2 together
/// with its exact gradient with respect to every code column.
struct FisherTerm {
  double value;
  Matrix gradient;  // K x N
};
FisherTerm fisher_term(const Matrix& codes, const std::vector<int>& labels,
                       int num_classes, double eta);

/// Discriminative fidelity of class `class_id` signals coded over a
/// structured dictionary:
///   ||X_c - D A_c||_F^2 + ||X_c - D_c A_c^c||_F^2 + sum_{j != c} ||D_j A_c^j||_F^2
/// where A_c^j is the row block of the class-j atoms.
double discriminative_fidelity(const Matrix& class_signals, const Dictionary& dict,
                               const Matrix& class_codes, int class_id);

/// Jointly learned classifier parameters; which fields are present depends
/// on the training method.
struct ClassifierParams {
  std::optional<Matrix> linear;          // W, C x K
  std::optional<Matrix> code_transform;  // G, K x K
  std::optional<Matrix> theta;           // K x 1 (linear f) or d x K (bilinear f)
  double bias = 0.0;
};

} // namespace ddl

#endif
