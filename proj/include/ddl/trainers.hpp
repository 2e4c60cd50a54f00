#ifndef DDL_TRAINERS_HPP
#define DDL_TRAINERS_HPP

#include "ddl/dict_optimize.hpp"
#include "ddl/discriminators.hpp"
#include "ddl/sparse_coding.hpp"
#include "ddl/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ddl {

enum class Method { src, metaface, dlsi, supervised_dl, dksvd, lcksvd, fddl, unified };
enum class ClassifierForm { linear, bilinear };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Term selection for the general framework: a fidelity channel (optionally
/// label-aware) plus a coefficient-discrimination channel.
enum class FidelityKind { plain, per_class, discriminative };
enum class DiscriminationKind { none, linear_regression, label_consistent, fisher, logistic };

struct UnifiedTerms {
  FidelityKind fidelity = FidelityKind::plain;
  DiscriminationKind discrimination = DiscriminationKind::none;
};

FidelityKind fidelity_from_name(const std::string& name);
DiscriminationKind discrimination_from_name(const std::string& name);

/// Hyperparameters shared by every trainer. Unset weights fall back to the
/// documented defaults: sparsity weights to 0.1 * mean signal norm,
/// discrimination weights to 1, the DLSI incoherence weight to 0.5 and the
/// elastic weight of the Fisher term to 1.
struct MethodConfig {
  Method method = Method::metaface;
  int atoms_per_class = 0;  // per-class dictionary size (structured methods)
  int total_atoms = 0;      // global dictionary size; atoms_per_class * C if 0

  std::optional<double> lambda;   // l1 weight of the per-class and SRC codes
  std::optional<double> lambda0;  // supervised fidelity weight
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> lambda3;
  std::optional<double> eta;      // incoherence (dlsi) / elastic (fddl)

  ClassifierForm classifier_form = ClassifierForm::linear;
  std::uint64_t seed = 0;
  AlternationSchedule schedule;
  SolverOptions solver;
  UnifiedTerms unified;

  void validate() const;
};

struct TrainedModel {
  Method method = Method::metaface;
  Method resolved = Method::metaface;  // decision-rule dispatch tag
  int num_classes = 0;
  Dictionary dictionary;
  std::optional<ClassifierParams> classifier;
  std::vector<TrainedModel> submodels;  // one-vs-all binaries (supervised_dl)
  int positive_class = 0;               // binary supervised: the +1 label
  std::optional<Matrix> codes;          // final training codes (fddl)
  MethodConfig config;                  // with resolved hyperparameters
  TrainingTrace trace;
};

/// Per-class dictionaries, Eq.-style alternation between coding and
/// constrained column updates.
TrainedModel train_metaface(const LabeledDataset& data, const MethodConfig& cfg);

/// Metaface plus the structured-incoherence penalty between class dictionaries.
TrainedModel train_dlsi(const LabeledDataset& data, const MethodConfig& cfg);

/// Flags atom k of class i when some atom of another class has absolute
/// inner product strictly above tau with it.
std::vector<std::vector<bool>> detect_common_atoms(const TrainedModel& model, double tau);
std::vector<bool> flatten_atom_mask(const TrainedModel& model,
                                    const std::vector<std::vector<bool>>& mask);

/// Joint dictionary + logistic classifier on the codes; binary labels only
/// (two classes; class 1 maps to margin +1).
TrainedModel train_supervised_dl(const LabeledDataset& data, const MethodConfig& cfg);

/// One binary supervised model per class with +-1 labels.
std::vector<TrainedModel> train_one_vs_all_supervised(const LabeledDataset& data,
                                                      const MethodConfig& cfg);

/// The one-vs-all ensemble packaged as a single model (max-score decision).
TrainedModel train_supervised_multiclass(const LabeledDataset& data,
                                         const MethodConfig& cfg);

/// Joint dictionary + label regression, solved through the fused stacking of
/// the reconstruction and regression terms.
TrainedModel train_dksvd(const LabeledDataset& data, const MethodConfig& cfg);

/// Adds the discriminative sparse-code error channel; atoms carry class
/// labels assigned in contiguous blocks.
TrainedModel train_lcksvd(const LabeledDataset& data, const MethodConfig& cfg);

/// Structured dictionary with discriminative fidelity and the Fisher
/// coefficient term.
TrainedModel train_fddl(const LabeledDataset& data, const MethodConfig& cfg);

/// General framework: trains the composite objective selected by
/// cfg.unified. Degenerates to each reviewed method when configured with
/// that method's terms.
TrainedModel train_unified(const LabeledDataset& data, const MethodConfig& cfg);

/// The raw training columns, grouped by class, as a residual-rule model.
TrainedModel make_src_model(const LabeledDataset& data);

/// Dispatch on cfg.method.
TrainedModel train(const LabeledDataset& data, const MethodConfig& cfg);

// Shared internals, exposed for tests.
namespace detail {
double resolve_sparsity_weight(const std::optional<double>& configured, const Matrix& signals);
Matrix init_atoms_from_columns(const Matrix& signals, Index count, std::uint64_t seed);
Matrix ridge_fit(const Matrix& targets, const Matrix& codes, double ridge = 1e-6);

// One classifier block on fixed codes: fits (weights, bias) to +-1 margins
// and reports the unregularized logistic data loss before and after.
struct LogisticFitResult {
  Matrix weights;
  double bias;
  double loss_before;
  double loss_after;
};
LogisticFitResult fit_logistic_classifier(const Matrix& signals, const Matrix& codes,
                                          const Vector& margins, double ridge,
                                          ClassifierForm form, const Matrix& init_weights,
                                          double init_bias);
} // namespace detail

} // namespace ddl

#endif
