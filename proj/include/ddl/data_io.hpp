#ifndef DDL_DATA_IO_HPP
#define DDL_DATA_IO_HPP

#include "ddl/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ddl {

/// Reads "label,f1,...,fd" rows (no header, 1-based integer labels).
/// Failures carry the offending line number.
LabeledDataset load_csv(const std::string& path);

/// Writes the same format with full double round-trip precision.
void save_csv(const LabeledDataset& dataset, const std::string& path);

/// Synthetic generation with planted per-class dictionaries.
struct SynthSpec {
  int classes = 2;
  int dim = 16;
  int atoms_per_class = 4;
  int samples_per_class = 20;
  int sparsity = 2;          // nonzeros per sample, drawn from own-class atoms
  double noise_sigma = 0.0;  // entrywise Gaussian noise level
  double coherence = 0.0;    // 0 = mutually orthogonal class blocks (when the
                             // ambient dimension allows), 1 = fully shared
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  LabeledDataset dataset;
  std::vector<Matrix> class_dictionaries;  // ground truth, unit columns
};

SynthResult synth_planted(const SynthSpec& spec);

enum class NormalizeMode { unit_l2, none };

/// unit_l2 rescales every nonzero column to norm 1; zero columns pass through.
LabeledDataset normalize_signals(LabeledDataset dataset, NormalizeMode mode);

/// Stratified train/test split; every class keeps at least one training
/// sample and the per-class train fraction is within one sample of the
/// request. Deterministic under the seed.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                double train_fraction,
                                                std::uint64_t seed);

} // namespace ddl

#endif
