#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stochcbf/safety_filter.hpp"
#include "stochcbf/scenario_json.hpp"
#include "stochcbf/scenarios.hpp"
#include "test_util.hpp"

using namespace stochcbf;
using namespace stochcbf::testutil;

TEST_CASE("preset ids cover the six experiments") {
    const auto ids = preset_ids();
    REQUIRE(ids.size() == 6);
    for (const auto& id : ids) CHECK_NOTHROW(preset(id));
    CHECK_THROWS_AS(preset("pendulum"), ContractViolation);
}

TEST_CASE("affine preset parameters") {
    const auto p = preset("affine_1d");
    CHECK(p.scenario.horizon == 150);
    CHECK(p.scenario.initial_state[0] == 1.0);
    CHECK(p.scenario.system.noise_cov()(0, 0) == doctest::Approx(0.01));
    CHECK(p.scenario.safe_set.barriers()[0].scale() == 50.0);
    CHECK(std::get<ExpQuadratic>(p.scenario.conditions[0].family).beta == 1e-4);
    CHECK(p.scenario.nominal_policy(0, vec1(0.7))[0] == -0.7);
    CHECK(p.expected_bound == doctest::Approx(0.015).epsilon(1e-12));
}

TEST_CASE("pendulum presets share dynamics and differ in the condition") {
    const auto lin = preset("pendulum_linear");
    const auto poly = preset("pendulum_poly");
    const auto expq = preset("pendulum_expquad");
    for (const auto* p : {&lin, &poly, &expq}) {
        CHECK(p->scenario.horizon == 100);
        CHECK(p->scenario.initial_state == Vec::Zero(2));
        CHECK(p->scenario.dynamics.type == "pendulum");
        CHECK(p->scenario.system.noise_cov()(0, 0) == doctest::Approx(2.5e-5));
        CHECK(p->scenario.system.noise_cov()(1, 1) == doctest::Approx(6.25e-4));
        CHECK(p->scenario.nominal_policy(3, vec2(0.1, 0.2)) == Vec::Zero(1));
        CHECK(p->scenario.safe_set.barriers()[0].upper_bound() == 1.0);
    }

    const auto& bar = lin.scenario.safe_set.barriers()[0];
    const double alpha = std::get<LinearZeroing>(lin.scenario.conditions[0].family).alpha;
    CHECK(alpha == max_feasible_alpha(bar, lin.scenario.system.noise_cov()));
    CHECK(alpha == doctest::Approx(0.9976290843027693).epsilon(1e-12));

    CHECK(expq.scenario.safe_set.barriers()[0].scale() == 10.0);
    CHECK(std::get<ExpQuadratic>(expq.scenario.conditions[0].family).beta == 1e-5);
    CHECK(expq.expected_bound == doctest::Approx(1.0453999297624849e-03).epsilon(1e-12));
    CHECK(lin.expected_bound == doctest::Approx(0.21130301144656105).epsilon(1e-12));
}

TEST_CASE("squared-transform preset uses a uniformly feasible level") {
    const auto p = preset("pendulum_poly");
    const auto& s = p.scenario;
    const double beta = std::get<PolynomialSquared>(s.conditions[0].family).beta;
    CHECK(beta == 3.0e-4);  // regression pin: smallest uniformly feasible level, rounded up

    // The trace formula is strictly smaller and infeasible at the origin; the
    // preset level keeps a positive margin there (F = 0 minimizes the
    // expectation, so u = 0 attains the maximal residual).
    const double beta_formula =
        max_feasible_beta_poly(s.safe_set.barriers()[0], s.system.noise_cov());
    CHECK(beta > beta_formula);
    const double r0 = condition_residual(s.conditions[0], s.system, s.safe_set.barriers()[0],
                                         Vec::Zero(2), Vec::Zero(1));
    CHECK(r0 > 0.0);
    CHECK(p.expected_bound == doctest::Approx(100 * beta).epsilon(1e-12));

    // Feasibility margin holds across a grid of safe states (the sweep that
    // sized the level found its worst case near (-0.21, 0.12)).
    SolverOptions opts;
    for (double th = -0.75; th <= 0.75; th += 0.125) {
        for (double om = -0.75; om <= 0.75; om += 0.125) {
            const Vec x = vec2(th, om);
            if (!s.safe_set.contains(x)) continue;
            CHECK_NOTHROW(filter_step(s.system, s.conditions[0], s.safe_set.barriers()[0], x,
                                      Vec::Zero(1), opts));
        }
    }
}

TEST_CASE("hyperbola preset parameters") {
    const auto p = preset("integrator_hyperbola");
    const auto& bar = p.scenario.safe_set.barriers()[0];
    CHECK(bar.quad() == mat2(5, 0, 0, -1));
    CHECK(bar.constant() == 0.3);
    CHECK(bar.scale() == 20.0);
    CHECK(p.scenario.horizon == 300);
    CHECK(p.scenario.initial_state == vec2(-2.5, 1.0));
    CHECK(p.scenario.nominal_policy(0, vec2(-2.5, 1.0)) == vec2(5.0, -0.5));
    CHECK(p.expected_bound == doctest::Approx(0.03).epsilon(1e-12));
    // Lambda stays PD despite the indefinite quadratic coefficient.
    CHECK_NOTHROW(
        make_exp_quad_moment(p.scenario.system.noise_cov(), bar.scaled_quad()));
    CHECK(convexity_certificate(bar, p.scenario.system.noise_cov()) ==
          Convexity::not_certified);
}

TEST_CASE("multi-obstacle preset geometry") {
    const auto p = preset("integrator_multi");
    const auto& barriers = p.scenario.safe_set.barriers();
    REQUIRE(barriers.size() == 4);
    const std::vector<Vec> centers = {vec2(-1.5, 0.7), vec2(0.5, 0.7), vec2(-0.5, -0.7),
                                      vec2(1.5, -0.7)};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(barriers[i].quad() == Mat::Identity(2, 2));
        CHECK(Vec(-0.5 * barriers[i].lin()) == centers[i]);
        CHECK(barriers[i].constant() ==
              doctest::Approx(centers[i].squaredNorm() - 0.16).epsilon(1e-15));
        CHECK(barriers[i].scale() == 20.0);
        // h_i vanishes exactly on the obstacle circle of radius 0.4.
        const Vec rim = centers[i] + vec2(0.4, 0.0);
        CHECK(barriers[i].value(rim) == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(std::get<ExpQuadratic>(p.scenario.conditions[i].family).beta == 1e-5);
        CHECK(p.scenario.conditions[i].barrier_index == static_cast<int>(i));
    }
    CHECK(p.scenario.initial_state == vec2(-2.5, 0.5));
    CHECK(p.scenario.nominal_policy(0, Vec::Zero(2)) == vec2(2.5, -0.5));
}

TEST_CASE("every preset starts strictly inside its safe set") {
    for (const auto& id : preset_ids()) {
        const auto p = preset(id);
        CHECK(p.scenario.safe_set.min_barrier_value(p.scenario.initial_state) > 0.0);
    }
}

TEST_CASE("expected bounds equal the bound module's values") {
    for (const auto& id : preset_ids()) {
        const auto p = preset(id);
        CHECK(p.expected_bound ==
              doctest::Approx(scenario_bound(p.scenario).raw).epsilon(1e-13));
    }
}

TEST_CASE("presets survive a JSON round trip with identical bounds and rollouts") {
    for (const auto& id : preset_ids()) {
        const auto p = preset(id);
        const Scenario back = scenario_from_json(nlohmann::json::parse(
            scenario_to_json(p.scenario).dump()));
        CHECK(scenario_bound(back).raw == scenario_bound(p.scenario).raw);
    }
}

TEST_CASE("default grids are well formed") {
    for (const auto& id : preset_ids()) {
        const auto p = preset(id);
        CHECK(p.default_grid.n1 >= 1);
        CHECK(p.default_grid.n2 >= 1);
        CHECK(p.default_grid.x1_max >= p.default_grid.x1_min);
    }
}
