#ifndef DDL_CLASSIFY_HPP
#define DDL_CLASSIFY_HPP

#include "ddl/sparse_coding.hpp"
#include "ddl/trainers.hpp"
#include "ddl/types.hpp"

#include <optional>
#include <vector>

namespace ddl {

struct ClassificationResult {
  int predicted_class = 0;  // 1-based; ties resolve to the lowest class id
  Vector scores;            // per-class residuals (lower wins) or classifier
                            // scores (higher wins), length C
  Vector code;              // the query's sparse code, unmasked
};

/// SRC: codes the query over the raw training columns, then picks the class
/// whose coefficient block reconstructs it best.
ClassificationResult classify_src(const LabeledDataset& training, const Vector& query,
                                  double lambda, const SolverOptions& opts = {});

/// Residual rule over a structured dictionary. A mask entry set to true
/// zeroes that atom's coefficient before the residuals are computed; the
/// returned code is untouched.
ClassificationResult classify_residual(const Dictionary& dicts, const Vector& query,
                                       double lambda, const SolverOptions& opts = {},
                                       const std::vector<bool>* mask = nullptr);
ClassificationResult classify_residual(const std::vector<Matrix>& dicts,
                                       const Vector& query, double lambda,
                                       const SolverOptions& opts = {},
                                       const std::vector<bool>* mask = nullptr);

/// argmax over rows of W * code.
ClassificationResult classify_linear(const Matrix& classifier, const Vector& code);

struct ClassifyOptions {
  double lambda = -1.0;  // negative: use the model's training sparsity weight
  SolverOptions solver;
  std::optional<double> mask_tau;  // residual methods: mask common atoms
  bool fddl_per_class_coding = false;
};

/// Dispatches on the model's resolved method: residual rule for Track I and
/// FDDL, linear rule on codes for D-KSVD / LC-KSVD, max one-vs-all score for
/// SupervisedDL.
ClassificationResult classify_model(const TrainedModel& model, const Vector& query,
                                    const ClassifyOptions& opts = {});

struct EvalReport {
  double accuracy = 0.0;
  Vector per_class_accuracy;   // length C
  Eigen::MatrixXi confusion;   // rows: true class, cols: predicted
  Index total = 0;
};

EvalReport evaluate(const TrainedModel& model, const LabeledDataset& data,
                    const ClassifyOptions& opts = {}, int threads = 1);

} // namespace ddl

#endif
