#include "ddl/types.hpp"

#include <algorithm>

namespace ddl {

int Dictionary::num_classes() const {
  if (atom_class.empty()) return 0;
  return *std::max_element(atom_class.begin(), atom_class.end());
}

std::pair<Index, Index> Dictionary::class_block(int c) const {
  if (atom_class.empty())
    throw DataError("dictionary has no atom-class assignment");
  Index offset = -1, count = 0;
  for (Index k = 0; k < static_cast<Index>(atom_class.size()); ++k) {
    if (atom_class[static_cast<size_t>(k)] == c) {
      if (offset < 0) offset = k;
      ++count;
    }
  }
  if (offset < 0)
    throw DataError("dictionary has no atoms of class " + std::to_string(c));
  return {offset, count};
}

Matrix Dictionary::class_atoms(int c) const {
  auto [offset, count] = class_block(c);
  return atoms.middleCols(offset, count);
}

void Dictionary::validate() const {
  constexpr double kBallSlack = 1e-9;
  for (Index k = 0; k < atoms.cols(); ++k) {
    if (atoms.col(k).norm() > 1.0 + kBallSlack)
      throw DataError("dictionary column " + std::to_string(k) +
                      " violates the unit-ball constraint (norm " +
                      std::to_string(atoms.col(k).norm()) + ")");
  }
  if (atom_class.empty()) return;
  if (static_cast<Index>(atom_class.size()) != atoms.cols())
    throw DataError("atom_class length does not match the atom count");
  const int C = num_classes();
  std::vector<bool> closed(static_cast<size_t>(C) + 1, false);
  for (size_t k = 0; k < atom_class.size(); ++k) {
    const int c = atom_class[k];
    if (c < 1 || c > C)
      throw DataError("atom class id out of range at atom " + std::to_string(k));
    if (k > 0 && c != atom_class[k - 1]) {
      closed[static_cast<size_t>(atom_class[k - 1])] = true;
      if (closed[static_cast<size_t>(c)])
        throw DataError("atoms of class " + std::to_string(c) + " are not contiguous");
    }
  }
}

std::vector<Index> LabeledDataset::class_columns(int c) const {
  std::vector<Index> cols;
  for (Index i = 0; i < size(); ++i)
    if (labels[static_cast<size_t>(i)] == c) cols.push_back(i);
  return cols;
}

Matrix LabeledDataset::class_matrix(int c) const {
  const auto cols = class_columns(c);
  Matrix out(dim(), static_cast<Index>(cols.size()));
  for (Index i = 0; i < out.cols(); ++i)
    out.col(i) = signals.col(cols[static_cast<size_t>(i)]);
  return out;
}

Index LabeledDataset::class_count(int c) const {
  return static_cast<Index>(class_columns(c).size());
}

void LabeledDataset::validate() const {
  if (size() < 1) throw DataError("dataset is empty");
  if (dim() < 1) throw DataError("dataset has zero-dimensional signals");
  if (static_cast<Index>(labels.size()) != size())
    throw DataError("label count does not match the signal count");
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 1 || labels[i] > num_classes)
      throw DataError("label out of range at column " + std::to_string(i));
}

} // namespace ddl
