#include "ddl/data_io.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ddl {

namespace {

double parse_number(const std::string& field, size_t line_no) {
  size_t pos = 0;
  double value;
  try {
    value = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": non-numeric field '" +
                    field + "'");
  }
  while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos])))
    ++pos;
  if (pos != field.size())
    throw DataError("line " + std::to_string(line_no) + ": non-numeric field '" +
                    field + "'");
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

LabeledDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ','))
      values.push_back(parse_number(field, line_no));
    if (values.size() < 2)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected 'label,f1,...' with at least one feature");
    const double raw_label = values[0];
    if (raw_label != std::floor(raw_label) || raw_label < 1)
      throw DataError("line " + std::to_string(line_no) +
                      ": label must be an integer >= 1");
    if (width == 0)
      width = values.size();
    else if (values.size() != width)
      throw DataError("line " + std::to_string(line_no) + ": ragged row (" +
                      std::to_string(values.size() - 1) + " features, expected " +
                      std::to_string(width - 1) + ")");
    labels.push_back(static_cast<int>(raw_label));
    values.erase(values.begin());
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("'" + path + "' contains no data rows");

  LabeledDataset dataset;
  dataset.signals.resize(static_cast<Index>(width - 1), static_cast<Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j)
      dataset.signals(static_cast<Index>(j), static_cast<Index>(i)) = rows[i][j];
  dataset.labels = std::move(labels);
  dataset.num_classes = *std::max_element(dataset.labels.begin(), dataset.labels.end());
  dataset.validate();
  return dataset;
}

void save_csv(const LabeledDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (Index n = 0; n < dataset.size(); ++n) {
    out << dataset.labels[static_cast<size_t>(n)];
    for (Index j = 0; j < dataset.dim(); ++j)
      out << ',' << format_double(dataset.signals(j, n));
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

void SynthSpec::validate() const {
  if (classes < 1 || dim < 1 || atoms_per_class < 1 || samples_per_class < 1 ||
      sparsity < 1)
    throw ConfigError("all synthetic counts must be positive");
  if (noise_sigma < 0) throw ConfigError("noise level must be nonnegative");
  if (coherence < 0 || coherence > 1)
    throw ConfigError("coherence control must lie in [0, 1]");
  if (sparsity > atoms_per_class)
    throw ConfigError("sparsity exceeds atoms per class");
}

SynthResult synth_planted(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(0.75, 1.5);

  const Index d = spec.dim;
  const Index total_atoms = static_cast<Index>(spec.classes) * spec.atoms_per_class;
  const bool shared_pool = spec.coherence > 0;
  const Index needed = total_atoms + (shared_pool ? spec.atoms_per_class : 0);

  // Orthonormal base directions when the ambient dimension allows; plain
  // normalized Gaussian atoms otherwise.
  Matrix base(d, needed);
  for (Index j = 0; j < needed; ++j)
    for (Index i = 0; i < d; ++i) base(i, j) = gauss(rng);
  if (needed <= d) {
    Eigen::HouseholderQR<Matrix> qr(base);
    Matrix q = qr.householderQ() * Matrix::Identity(d, needed);
    // Fix the sign so the construction is stable under seed changes elsewhere.
    for (Index j = 0; j < needed; ++j)
      if (q.col(j).sum() < 0) q.col(j) = -q.col(j);
    base = q;
  } else {
    for (Index j = 0; j < needed; ++j) base.col(j).normalize();
  }

  SynthResult result;
  result.class_dictionaries.reserve(static_cast<size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    Matrix atoms = base.middleCols(static_cast<Index>(c) * spec.atoms_per_class,
                                   spec.atoms_per_class);
    if (shared_pool) {
      const Matrix shared = base.middleCols(total_atoms, spec.atoms_per_class);
      atoms = std::sqrt(1.0 - spec.coherence) * atoms +
              std::sqrt(spec.coherence) * shared;
      for (Index j = 0; j < atoms.cols(); ++j) atoms.col(j).normalize();
    }
    result.class_dictionaries.push_back(std::move(atoms));
  }

  const Index n_total = static_cast<Index>(spec.classes) * spec.samples_per_class;
  result.dataset.signals.resize(d, n_total);
  result.dataset.labels.resize(static_cast<size_t>(n_total));
  result.dataset.num_classes = spec.classes;

  std::vector<Index> atom_ids(static_cast<size_t>(spec.atoms_per_class));
  std::iota(atom_ids.begin(), atom_ids.end(), Index{0});

  Index col = 0;
  for (int c = 0; c < spec.classes; ++c) {
    const Matrix& atoms = result.class_dictionaries[static_cast<size_t>(c)];
    for (int s = 0; s < spec.samples_per_class; ++s, ++col) {
      std::shuffle(atom_ids.begin(), atom_ids.end(), rng);
      Vector signal = Vector::Zero(d);
      // Nonnegative combination weights: codes of different classes then
      // occupy different orthants of the coefficient space, which a linear
      // classifier on codes can separate.
      for (int k = 0; k < spec.sparsity; ++k)
        signal += magnitude(rng) * atoms.col(atom_ids[static_cast<size_t>(k)]);
      if (spec.noise_sigma > 0)
        for (Index i = 0; i < d; ++i) signal[i] += spec.noise_sigma * gauss(rng);
      result.dataset.signals.col(col) = signal;
      result.dataset.labels[static_cast<size_t>(col)] = c + 1;
    }
  }
  return result;
}

LabeledDataset normalize_signals(LabeledDataset dataset, NormalizeMode mode) {
  if (mode == NormalizeMode::none) return dataset;
  for (Index n = 0; n < dataset.size(); ++n) {
    const double norm = dataset.signals.col(n).norm();
    if (norm > 0) dataset.signals.col(n) /= norm;
  }
  return dataset;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                double train_fraction,
                                                std::uint64_t seed) {
  dataset.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie strictly between 0 and 1");

  std::mt19937_64 rng(seed);
  std::vector<Index> train_cols, test_cols;
  for (int c = 1; c <= dataset.num_classes; ++c) {
    auto cols = dataset.class_columns(c);
    if (cols.empty())
      throw DataError("class " + std::to_string(c) +
                      " has no samples; cannot guarantee a training sample");
    std::shuffle(cols.begin(), cols.end(), rng);
    const auto n_train = std::clamp<Index>(
        static_cast<Index>(std::llround(train_fraction * static_cast<double>(cols.size()))),
        1, static_cast<Index>(cols.size()));
    train_cols.insert(train_cols.end(), cols.begin(), cols.begin() + n_train);
    test_cols.insert(test_cols.end(), cols.begin() + n_train, cols.end());
  }
  std::sort(train_cols.begin(), train_cols.end());
  std::sort(test_cols.begin(), test_cols.end());

  auto take = [&](const std::vector<Index>& cols) {
    LabeledDataset out;
    out.signals.resize(dataset.dim(), static_cast<Index>(cols.size()));
    out.labels.resize(cols.size());
    out.num_classes = dataset.num_classes;
    for (size_t i = 0; i < cols.size(); ++i) {
      out.signals.col(static_cast<Index>(i)) = dataset.signals.col(cols[i]);
      out.labels[i] = dataset.labels[static_cast<size_t>(cols[i])];
    }
    return out;
  };
  return {take(train_cols), take(test_cols)};
}

} // namespace ddl
