#include "ddl/run_config.hpp"

#include <fstream>
#include <sstream>

namespace ddl {

namespace {

std::string trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r");
  size_t end = s.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  }
  if (pos != value.size())
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
  size_t pos = 0;
  long long out;
  try {
    out = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
  }
  if (pos != value.size())
    throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
  return out;
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (config.count(key))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    config[key] = value;
  }
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void apply_config(const RunConfig& config, MethodConfig& cfg) {
  for (const auto& [key, value] : config) {
    if (key == "method") {
      cfg.method = method_from_name(value);
    } else if (key == "atoms_per_class") {
      cfg.atoms_per_class = static_cast<int>(parse_integer(key, value));
    } else if (key == "total_atoms") {
      cfg.total_atoms = static_cast<int>(parse_integer(key, value));
    } else if (key == "lambda") {
      cfg.lambda = parse_double(key, value);
    } else if (key == "lambda0") {
      cfg.lambda0 = parse_double(key, value);
    } else if (key == "lambda1") {
      cfg.lambda1 = parse_double(key, value);
    } else if (key == "lambda2") {
      cfg.lambda2 = parse_double(key, value);
    } else if (key == "lambda3") {
      cfg.lambda3 = parse_double(key, value);
    } else if (key == "eta") {
      cfg.eta = parse_double(key, value);
    } else if (key == "classifier_form") {
      if (value == "linear")
        cfg.classifier_form = ClassifierForm::linear;
      else if (value == "bilinear")
        cfg.classifier_form = ClassifierForm::bilinear;
      else
        throw ConfigError("config key 'classifier_form': expected linear or bilinear");
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    } else if (key == "max_outer_iterations") {
      cfg.schedule.max_outer_iterations = static_cast<int>(parse_integer(key, value));
    } else if (key == "tolerance") {
      cfg.schedule.relative_tolerance = parse_double(key, value);
    } else if (key == "max_lasso_iterations") {
      cfg.solver.max_iterations = static_cast<int>(parse_integer(key, value));
    } else if (key == "kkt_tolerance") {
      cfg.solver.kkt_tolerance = parse_double(key, value);
    } else if (key == "algorithm") {
      if (value == "proximal_gradient")
        cfg.solver.algorithm = LassoAlgorithm::proximal_gradient;
      else if (value == "coordinate_descent")
        cfg.solver.algorithm = LassoAlgorithm::coordinate_descent;
      else
        throw ConfigError(
            "config key 'algorithm': expected proximal_gradient or coordinate_descent");
    } else if (key == "step_rule") {
      if (value == "fixed")
        cfg.solver.step_rule = StepRule::fixed;
      else if (value == "backtracking")
        cfg.solver.step_rule = StepRule::backtracking;
      else
        throw ConfigError("config key 'step_rule': expected fixed or backtracking");
    } else if (key == "fidelity") {
      cfg.unified.fidelity = fidelity_from_name(value);
    } else if (key == "discrimination") {
      cfg.unified.discrimination = discrimination_from_name(value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
}

void check_required_parameters(const MethodConfig& cfg) {
  auto require_apc = [&](const char* method) {
    if (cfg.atoms_per_class < 1)
      throw ConfigError(std::string("method ") + method +
                        " requires config key 'atoms_per_class'");
  };
  auto require_size = [&](const char* method) {
    if (cfg.total_atoms < 1 && cfg.atoms_per_class < 1)
      throw ConfigError(std::string("method ") + method +
                        " requires config key 'total_atoms' (or 'atoms_per_class')");
  };
  switch (cfg.method) {
    case Method::src: break;
    case Method::metaface: require_apc("metaface"); break;
    case Method::dlsi: require_apc("dlsi"); break;
    case Method::supervised_dl: require_size("supervised_dl"); break;
    case Method::dksvd: require_size("dksvd"); break;
    case Method::lcksvd: require_apc("lcksvd"); break;
    case Method::fddl: require_apc("fddl"); break;
    case Method::unified:
      if (cfg.unified.fidelity != FidelityKind::plain ||
          cfg.unified.discrimination == DiscriminationKind::label_consistent)
        require_apc("unified");
      else
        require_size("unified");
      break;
  }
}

} // namespace ddl
