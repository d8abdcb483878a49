#ifndef DCS_CONFIG_JSON_HPP
#define DCS_CONFIG_JSON_HPP

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "dcs/core.hpp"
#include "dcs/solver.hpp"

namespace dcs {

inline std::string to_string(ThetaPolicy p) { return p == ThetaPolicy::kFixed ? "fixed" : "estimated"; }

inline ThetaPolicy theta_policy_from_string(const std::string& s) {
  if (s == "fixed") return ThetaPolicy::kFixed;
  if (s == "estimated") return ThetaPolicy::kEstimated;
  throw ValidationError("theta_policy must be 'fixed' or 'estimated', got '" + s + "'");
}

inline nlohmann::json to_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},
          {"lambda_auto", c.lambda_auto},
          {"lambda_scale", c.lambda_scale},
          {"eps_smooth", c.eps_smooth},
          {"outer_iterations", c.outer_iterations},
          {"inner_iterations", c.inner_iterations},
          {"objective_tol", c.objective_tol},
          {"state_tol", c.state_tol},
          {"theta_init", c.theta_init},
          {"theta_policy", to_string(c.theta_policy)},
          {"warm_theta_iterations", c.warm_theta_iterations},
          {"warm_theta_tol", c.warm_theta_tol}};
}

/// Overlays the keys present in j onto base. Unknown keys and wrong types are
/// validation errors; the result is validated.
inline SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig base = {}) {
  require(j.is_object(), "solver config must be a JSON object");
  static const std::set<std::string> known = {
      "lambda", "lambda_auto", "lambda_scale", "eps_smooth", "outer_iterations", "inner_iterations",
      "objective_tol", "state_tol", "theta_init", "theta_policy", "warm_theta_iterations", "warm_theta_tol"};
  for (const auto& [key, _] : j.items())
    require(known.count(key) > 0, "unknown solver config key '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("lambda", base.lambda);
    get("lambda_auto", base.lambda_auto);
    get("lambda_scale", base.lambda_scale);
    get("eps_smooth", base.eps_smooth);
    get("outer_iterations", base.outer_iterations);
    get("inner_iterations", base.inner_iterations);
    get("objective_tol", base.objective_tol);
    get("state_tol", base.state_tol);
    get("theta_init", base.theta_init);
    get("warm_theta_iterations", base.warm_theta_iterations);
    get("warm_theta_tol", base.warm_theta_tol);
    if (j.contains("theta_policy")) base.theta_policy = theta_policy_from_string(j.at("theta_policy").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("solver config: ") + e.what());
  }
  base.validate();
  return base;
}

inline SolverConfig load_solver_config(const std::string& path, SolverConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return solver_config_from_json(j, base);
}

}  // namespace dcs

#endif  // DCS_CONFIG_JSON_HPP
