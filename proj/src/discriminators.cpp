#include "ddl/discriminators.hpp"

#include <cmath>

namespace ddl {

namespace {

void check_labels(const std::vector<int>& labels, int num_classes) {
  if (num_classes < 1) throw DataError("class count must be positive");
  for (size_t n = 0; n < labels.size(); ++n)
    if (labels[n] < 1 || labels[n] > num_classes)
      throw DataError("label " + std::to_string(labels[n]) +
                      " out of range 1.." + std::to_string(num_classes) +
                      " at position " + std::to_string(n));
}

std::vector<Index> class_sizes(const std::vector<int>& labels, int num_classes) {
  std::vector<Index> sizes(static_cast<size_t>(num_classes), 0);
  for (int label : labels) ++sizes[static_cast<size_t>(label - 1)];
  for (int c = 0; c < num_classes; ++c)
    if (sizes[static_cast<size_t>(c)] == 0)
      throw DataError("class " + std::to_string(c + 1) + " has no samples");
  return sizes;
}

} // namespace

Matrix build_label_indicator(const std::vector<int>& labels, int num_classes) {
  check_labels(labels, num_classes);
  Matrix indicator = Matrix::Zero(num_classes, static_cast<Index>(labels.size()));
  for (size_t n = 0; n < labels.size(); ++n)
    indicator(labels[n] - 1, static_cast<Index>(n)) = 1.0;
  return indicator;
}

Matrix build_consistency_matrix(const std::vector<int>& labels,
                                const std::vector<int>& atom_class) {
  if (atom_class.empty())
    throw DataError("consistency matrix requires an atom-class assignment");
  int num_classes = 0;
  for (int c : atom_class) num_classes = std::max(num_classes, c);
  for (int label : labels) num_classes = std::max(num_classes, label);
  check_labels(labels, num_classes);
  check_labels(atom_class, num_classes);

  Matrix q = Matrix::Zero(static_cast<Index>(atom_class.size()),
                          static_cast<Index>(labels.size()));
  for (size_t k = 0; k < atom_class.size(); ++k)
    for (size_t n = 0; n < labels.size(); ++n)
      if (atom_class[k] == labels[n])
        q(static_cast<Index>(k), static_cast<Index>(n)) = 1.0;
  return q;
}

double logistic_loss(double margin) {
  if (margin >= 0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double incoherence_penalty(const Matrix& dict_a, const Matrix& dict_b) {
  if (dict_a.rows() != dict_b.rows())
    throw DataError("incoherence penalty needs matching row dimensions");
  return (dict_a.transpose() * dict_b).squaredNorm();
}

ScatterPair scatter_matrices(const Matrix& codes, const std::vector<int>& labels,
                             int num_classes) {
  if (static_cast<Index>(labels.size()) != codes.cols())
    throw DataError("label count does not match the code count");
  check_labels(labels, num_classes);
  const auto sizes = class_sizes(labels, num_classes);

  const Index K = codes.rows();
  ScatterPair out;
  out.class_means = Matrix::Zero(K, num_classes);
  for (Index n = 0; n < codes.cols(); ++n)
    out.class_means.col(labels[static_cast<size_t>(n)] - 1) += codes.col(n);
  for (int c = 0; c < num_classes; ++c)
    out.class_means.col(c) /= static_cast<double>(sizes[static_cast<size_t>(c)]);
  out.global_mean = codes.rowwise().mean();

  out.within = Matrix::Zero(K, K);
  for (Index n = 0; n < codes.cols(); ++n) {
    const Vector dev = codes.col(n) - out.class_means.col(labels[static_cast<size_t>(n)] - 1);
    out.within.noalias() += dev * dev.transpose();
  }
  out.between = Matrix::Zero(K, K);
  for (int c = 0; c < num_classes; ++c) {
    const Vector dev = out.class_means.col(c) - out.global_mean;
    out.between.noalias() += dev * dev.transpose();
  }
  return out;
}

FisherTerm fisher_term(const Matrix& codes, const std::vector<int>& labels,
                       int num_classes, double eta) {
  if (eta < 0) throw ConfigError("elastic weight must be nonnegative");
  const auto scatter = scatter_matrices(codes, labels, num_classes);
  const auto sizes = class_sizes(labels, num_classes);
  const Index N = codes.cols();

  FisherTerm out;
  out.value = scatter.within.trace() - scatter.between.trace() +
              eta * codes.squaredNorm();

  // d tr(S_W) / d a_i = 2 (a_i - m_c); the mean's own dependence cancels.
  // d tr(S_B) / d a_i = (2/N_c)(m_c - m) - (2/N) sum_c (m_c - m).
  Vector mean_shift = Vector::Zero(codes.rows());
  for (int c = 0; c < num_classes; ++c)
    mean_shift += scatter.class_means.col(c) - scatter.global_mean;

  out.gradient.resize(codes.rows(), N);
  for (Index n = 0; n < N; ++n) {
    const int c = labels[static_cast<size_t>(n)] - 1;
    const double inv_nc = 1.0 / static_cast<double>(sizes[static_cast<size_t>(c)]);
    const Vector within_grad = 2.0 * (codes.col(n) - scatter.class_means.col(c));
    const Vector between_grad =
        2.0 * inv_nc * (scatter.class_means.col(c) - scatter.global_mean) -
        (2.0 / static_cast<double>(N)) * mean_shift;
    out.gradient.col(n) = within_grad - between_grad + 2.0 * eta * codes.col(n);
  }
  return out;
}

double discriminative_fidelity(const Matrix& class_signals, const Dictionary& dict,
                               const Matrix& class_codes, int class_id) {
  if (!dict.structured())
    throw DataError("discriminative fidelity requires a structured dictionary");
  if (class_codes.rows() != dict.size())
    throw DataError("code rows do not match the dictionary atom count");
  if (class_signals.cols() != class_codes.cols())
    throw DataError("signal and code counts disagree");

  double value = (class_signals - dict.atoms * class_codes).squaredNorm();
  const int C = dict.num_classes();
  for (int j = 1; j <= C; ++j) {
    const auto [offset, count] = dict.class_block(j);
    const Matrix part = dict.atoms.middleCols(offset, count) *
                        class_codes.middleRows(offset, count);
    if (j == class_id)
      value += (class_signals - part).squaredNorm();
    else
      value += part.squaredNorm();
  }
  return value;
}

} // namespace ddl
