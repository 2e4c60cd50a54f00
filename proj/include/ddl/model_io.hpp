#ifndef DDL_MODEL_IO_HPP
#define DDL_MODEL_IO_HPP

#include "ddl/trainers.hpp"

#include <string>

namespace ddl {

/// Versioned textual model format: a header with the method tag, shapes and
/// resolved hyperparameters, the atom-class assignment, then named matrices
/// as row-major decimal blocks with full double round-trip precision.
/// Loading a file with a different format version fails.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

/// "iteration,objective" rows, one per trace entry starting at iteration 0.
void save_trace_csv(const TrainingTrace& trace, const std::string& path);

} // namespace ddl

#endif
