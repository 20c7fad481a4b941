#pragma once

#include "stochcbf/exit_bounds.hpp"
#include "stochcbf/scenario.hpp"

namespace stochcbf {

/// A named, fully parameterized experiment with its bound value at the start
/// state and a default heatmap grid for plotting.
struct ScenarioPreset {
    std::string id;
    Scenario scenario;
    double expected_bound = 0.0;  // raw bound at the initial state
    std::string figure_ref;
    GridSpec default_grid;
};

/// Builds one of the built-in presets:
///   affine_1d, pendulum_linear, pendulum_poly, pendulum_expquad,
///   integrator_hyperbola, integrator_multi.
/// Throws ContractViolation for unknown ids.
ScenarioPreset preset(const std::string& id);

std::vector<std::string> preset_ids();

}  // namespace stochcbf
