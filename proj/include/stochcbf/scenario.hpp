#pragma once

#include "stochcbf/cbf_constraints.hpp"

namespace stochcbf {

/// A complete experiment description: system, safe set, one condition per
/// barrier, horizon, start state and nominal policy. Immutable in use; build
/// through make_scenario so the invariants hold.
struct Scenario {
    std::string name;
    std::string description;
    DynamicsSpec dynamics;
    ControlAffineSystem system;
    SafeSet safe_set;
    std::vector<CbfCondition> conditions;  // conditions[i] constrains barrier conditions[i].barrier_index
    int horizon = 1;
    Vec initial_state;
    NominalPolicy nominal_policy;
    double dt = 0.0;
};

/// Validates and assembles a scenario. Requirements: horizon >= 1, the initial
/// state lies in the safe set, exactly one condition per barrier (indices a
/// permutation of 0..l-1), and every condition is admissible for its barrier
/// (exp-quadratic needs the scaled moment to exist, the squared transform
/// needs the bounded x'Ax + c form).
Scenario make_scenario(std::string name, std::string description, DynamicsSpec dynamics,
                       Mat noise_cov, SafeSet safe_set, std::vector<CbfCondition> conditions,
                       int horizon, Vec initial_state, NominalPolicy nominal_policy);

void validate_scenario(const Scenario& scenario);

}  // namespace stochcbf
