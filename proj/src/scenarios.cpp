#include "stochcbf/scenarios.hpp"

#include <cmath>

namespace stochcbf {

namespace {

// Squared-transform condition level for the pendulum preset. The trace formula
// tr((A*Sigma)^2) + tr(A*Sigma)^2 (~1.10e-5) leaves no feasible input at the
// origin (the deficit there is tr((A*Sigma)^2)), and a numerical sweep of
// min_u E[(h(F(x,u))-B)^2] - (h(x)-B)^2 over the whole safe set peaks at
// ~2.84e-4 near x = (-0.21, 0.12). This value is that maximum rounded up, so
// the condition is feasible at every safe state with margin.
constexpr double kPendulumPolyBeta = 3.0e-4;

Mat pendulum_barrier_quad() {
    const double s = -36.0 / (M_PI * M_PI);
    const double r3 = 1.0 / std::sqrt(3.0);
    Mat a(2, 2);
    a << s, s * r3, s * r3, s;
    return a;
}

Mat pendulum_sigma() {
    const double dt = 0.01;
    Mat sigma(2, 2);
    sigma << 0.05 * 0.05 * dt, 0.0, 0.0, 0.25 * 0.25 * dt;
    return sigma;
}

Scenario pendulum_scenario(const std::string& name, const std::string& description, double scale,
                           CbfCondition condition) {
    QuadraticBarrier barrier(pendulum_barrier_quad(), Vec::Zero(2), 1.0, scale, 1.0);
    Vec x0 = Vec::Zero(2);
    return make_scenario(name, description, DynamicsSpec{"pendulum", 0.01}, pendulum_sigma(),
                         SafeSet({barrier}), {std::move(condition)}, 100, x0,
                         NominalPolicy{"zero", {}, 1});
}

ScenarioPreset make_affine_1d() {
    const double dt = 0.01;
    Mat sigma = Mat::Constant(1, 1, dt);  // sigma^2 * dt with sigma = 1
    QuadraticBarrier barrier(Mat::Zero(1, 1), Vec::Ones(1), 0.0, 50.0);
    Vec x0 = Vec::Ones(1);
    return {"affine_1d",
            make_scenario("affine_1d",
                          "1D integrator with the affine barrier h(x) = x, scale 50",
                          DynamicsSpec{"integrator_1d", dt}, sigma, SafeSet({barrier}),
                          {make_exp_quadratic(1e-4)}, 150, x0,
                          NominalPolicy{"negate_state", {}, 1}),
            std::exp(-50.0) + 150 * 1e-4,
            "affine 1D experiment: 200 trials, 150 steps, heatmap over x in [0,3]",
            {0.0, 3.0, 301, 0.0, 0.0, 1}};
}

ScenarioPreset make_pendulum_linear() {
    // alpha = 1 + tr(A*Sigma), the largest feasible rate at the barrier peak.
    const QuadraticBarrier barrier(pendulum_barrier_quad(), Vec::Zero(2), 1.0, 1.0, 1.0);
    const double alpha = max_feasible_alpha(barrier, pendulum_sigma());
    return {"pendulum_linear",
            pendulum_scenario("pendulum_linear",
                              "inverted pendulum, zeroing condition at the maximal alpha", 1.0,
                              make_linear_zeroing(alpha)),
            1.0 - std::pow(alpha, 100),
            "pendulum comparison: 500 trials, 100 steps, zeroing condition",
            {-0.6, 0.6, 121, -0.6, 0.6, 121}};
}

ScenarioPreset make_pendulum_poly() {
    return {"pendulum_poly",
            pendulum_scenario("pendulum_poly", "inverted pendulum, squared-transform condition",
                              1.0, make_polynomial_squared(kPendulumPolyBeta, 1.0)),
            100 * kPendulumPolyBeta,  // (h(x0)-B)^2 = 0 at the origin
            "pendulum comparison: 500 trials, 100 steps, squared transform",
            {-0.6, 0.6, 121, -0.6, 0.6, 121}};
}

ScenarioPreset make_pendulum_expquad() {
    return {"pendulum_expquad",
            pendulum_scenario("pendulum_expquad",
                              "inverted pendulum, exponential condition with scale 10", 10.0,
                              make_exp_quadratic(1e-5)),
            std::exp(-10.0) + 100 * 1e-5,
            "pendulum comparison: 500 trials, 100 steps, exponential condition",
            {-0.6, 0.6, 121, -0.6, 0.6, 121}};
}

ScenarioPreset make_integrator_hyperbola() {
    const double dt = 0.01;
    Mat sigma(2, 2);
    sigma << 0.02 * dt, 0.0, 0.0, 0.02 * dt;
    Mat a(2, 2);
    a << 5.0, 0.0, 0.0, -1.0;
    QuadraticBarrier barrier(a, Vec::Zero(2), 0.3, 20.0);
    Vec x0(2);
    x0 << -2.5, 1.0;
    Vec goal(2);
    goal << 2.5, 0.5;
    return {"integrator_hyperbola",
            make_scenario(
                "integrator_hyperbola",
                "2D single integrator between hyperbola branches, nonconvex filter subproblem",
                DynamicsSpec{"single_integrator_2d", dt}, sigma, SafeSet({barrier}),
                {make_exp_quadratic(1e-4)}, 300, x0, NominalPolicy{"goal_seeking", goal, 2}),
            std::exp(-20.0 * 30.55) + 300 * 1e-4,
            "single-CBF obstacle run: 200 trials, 300 steps, goal (2.5, 0.5)",
            {-3.0, 3.0, 301, -1.5, 1.5, 151}};
}

ScenarioPreset make_integrator_multi() {
    const double dt = 0.01;
    Mat sigma(2, 2);
    sigma << 0.02 * dt, 0.0, 0.0, 0.02 * dt;
    const double radius = 0.4;
    const std::vector<Vec> centers = [] {
        std::vector<Vec> cs(4, Vec(2));
        cs[0] << -1.5, 0.7;
        cs[1] << 0.5, 0.7;
        cs[2] << -0.5, -0.7;
        cs[3] << 1.5, -0.7;
        return cs;
    }();
    std::vector<QuadraticBarrier> barriers;
    std::vector<CbfCondition> conditions;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        // h_i(x) = |x - c_i|^2 - radius^2, nonnegative exactly outside the disk
        barriers.emplace_back(Mat::Identity(2, 2), Vec(-2.0 * centers[i]),
                              centers[i].squaredNorm() - radius * radius, 20.0);
        conditions.push_back(make_exp_quadratic(1e-5, static_cast<int>(i)));
    }
    Vec x0(2);
    x0 << -2.5, 0.5;
    Vec goal(2);
    goal << 2.5, -0.5;
    Scenario scenario = make_scenario(
        "integrator_multi", "2D single integrator avoiding four circular obstacles",
        DynamicsSpec{"single_integrator_2d", dt}, sigma, SafeSet(barriers), conditions, 300, x0,
        NominalPolicy{"goal_seeking", goal, 2});
    const double bound = scenario_bound(scenario).raw;
    return {"integrator_multi", std::move(scenario), bound,
            "multi-CBF obstacle run: 200 trials, 300 steps, goal (2.5, -0.5)",
            {-3.0, 3.0, 301, -1.5, 1.5, 151}};
}

}  // namespace

ScenarioPreset preset(const std::string& id) {
    if (id == "affine_1d") return make_affine_1d();
    if (id == "pendulum_linear") return make_pendulum_linear();
    if (id == "pendulum_poly") return make_pendulum_poly();
    if (id == "pendulum_expquad") return make_pendulum_expquad();
    if (id == "integrator_hyperbola") return make_integrator_hyperbola();
    if (id == "integrator_multi") return make_integrator_multi();
    throw ContractViolation("unknown preset id: " + id);
}

std::vector<std::string> preset_ids() {
    return {"affine_1d",        "pendulum_linear",      "pendulum_poly",
            "pendulum_expquad", "integrator_hyperbola", "integrator_multi"};
}

}  // namespace stochcbf
