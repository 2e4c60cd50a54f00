#ifndef DDL_RUN_CONFIG_HPP
#define DDL_RUN_CONFIG_HPP

#include "ddl/trainers.hpp"

#include <map>
#include <string>

namespace ddl {

/// Plain key=value configuration ('#' starts a comment). Unknown keys are
/// rejected; values must parse to their declared types.
using RunConfig = std::map<std::string, std::string>;

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Applies recognized keys onto a MethodConfig. Throws ConfigError on
/// unknown keys or unparseable values.
void apply_config(const RunConfig& config, MethodConfig& cfg);

/// Per-method presence checks: a missing required hyperparameter raises a
/// ConfigError naming the key.
void check_required_parameters(const MethodConfig& cfg);

} // namespace ddl

#endif
