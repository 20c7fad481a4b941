#include "stochcbf/scenario.hpp"

#include <algorithm>

namespace stochcbf {

void validate_scenario(const Scenario& s) {
    if (s.horizon < 1) throw ContractViolation("scenario: horizon must be >= 1");
    if (s.initial_state.size() != s.system.state_dim())
        throw ContractViolation("scenario: initial state dimension mismatch");
    if (s.safe_set.dim() != s.system.state_dim())
        throw ContractViolation("scenario: safe set dimension mismatch");
    if (!s.safe_set.contains(s.initial_state))
        throw ContractViolation("scenario: initial state lies outside the safe set");
    if (s.conditions.empty()) throw ContractViolation("scenario: needs at least one condition");
    std::vector<int> seen(s.safe_set.size(), 0);
    for (const auto& c : s.conditions) {
        if (c.barrier_index < 0 || c.barrier_index >= s.safe_set.size())
            throw ContractViolation("scenario: condition references unknown barrier");
        seen[c.barrier_index] += 1;
        const auto& bar = s.safe_set.barriers()[c.barrier_index];
        if (const auto* p = std::get_if<PolynomialSquared>(&c.family)) {
            if (bar.lin().cwiseAbs().maxCoeff() != 0.0 || p->bound != bar.constant() ||
                !bar.upper_bound() || *bar.upper_bound() != p->bound)
                throw UnsupportedBarrierForm(
                    "scenario: squared-transform condition needs h = x'Ax + c with B = c");
        }
        if (std::holds_alternative<ExpQuadratic>(c.family)) {
            make_exp_quad_moment(s.system.noise_cov(), bar.scaled_quad());  // throws LambdaNotPd
        }
        if (std::holds_alternative<LinearZeroing>(c.family) && !bar.upper_bound())
            throw ContractViolation("scenario: zeroing condition needs a bounded barrier");
        if (std::holds_alternative<CMartingale>(c.family) && !bar.upper_bound())
            throw ContractViolation("scenario: c-martingale condition needs a bounded barrier");
    }
    if (std::any_of(seen.begin(), seen.end(), [](int n) { return n != 1; }))
        throw ContractViolation("scenario: conditions must cover each barrier exactly once");
}

Scenario make_scenario(std::string name, std::string description, DynamicsSpec dynamics,
                       Mat noise_cov, SafeSet safe_set, std::vector<CbfCondition> conditions,
                       int horizon, Vec initial_state, NominalPolicy nominal_policy) {
    ControlAffineSystem system = make_system(dynamics, noise_cov);
    nominal_policy.input_dim = system.input_dim();
    Scenario s{std::move(name), std::move(description), std::move(dynamics),
               std::move(system), std::move(safe_set), std::move(conditions),
               horizon, std::move(initial_state), std::move(nominal_policy),
               0.0};
    s.dt = s.dynamics.dt;
    validate_scenario(s);
    return s;
}

}  // namespace stochcbf
