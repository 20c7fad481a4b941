#pragma once

#include <string>

#include <json.hpp>

#include "stochcbf/scenario.hpp"

namespace stochcbf {

/// Scenario <-> JSON document. Matrices serialize as row-major nested arrays;
/// the schema is documented in the repository README. Round-trips are exact
/// for IEEE doubles.
nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace stochcbf
