#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/LU>

#include "stochcbf/gaussian_moments.hpp"
#include "test_util.hpp"

using namespace stochcbf;
using namespace stochcbf::testutil;

TEST_CASE("lambda_matrix basics") {
    const Mat half_inv = lambda_matrix(Mat::Identity(2, 2), Mat::Zero(2, 2));
    CHECK((half_inv - 0.5 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

    // Pendulum at scale 10: the diagonal of 0.5*Sigma^{-1} (2e4 and 800)
    // dominates the scaled quadratic coefficient, so Lambda stays PD.
    const Mat lam = lambda_matrix(pendulum_sigma(), Mat(10.0 * pendulum_quad()));
    Eigen::LLT<Mat> llt(lam);
    CHECK(llt.info() == Eigen::Success);
    CHECK(lam(0, 0) == doctest::Approx(0.5 / 2.5e-5 + 10 * pendulum_quad()(0, 0)).epsilon(1e-12));

    CHECK_THROWS_AS(lambda_matrix(mat1(1.0), mat1(-1.0)), LambdaNotPd);
}

TEST_CASE("log_det_term values") {
    CHECK(log_det_term(pendulum_sigma(), Mat::Zero(2, 2)) == 0.0);
    CHECK(log_det_term(Mat::Identity(2, 2), Mat(0.5 * Mat::Identity(2, 2))) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-14));

    // Pendulum at scale 10: finite and negative (the quadratic part is
    // negative definite), consistent with the determinant identity.
    const auto moment = make_exp_quad_moment(pendulum_sigma(), Mat(10.0 * pendulum_quad()));
    CHECK(moment.log_det_term < 0.0);
    const Mat inner = Mat::Identity(2, 2) + 2.0 * pendulum_sigma() * (10.0 * pendulum_quad());
    CHECK(std::exp(-2.0 * moment.log_det_term) * inner.determinant() ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("theta closed forms") {
    // Affine case: (b/2)' (0.5*Sigma^{-1})^{-1} (b/2) = 0.5 b'Sigma b.
    const Mat sigma = mat2(0.3, 0.1, 0.1, 0.4);
    const Vec b = vec2(1.5, -0.7);
    const auto moment = make_exp_quad_moment(sigma, Mat::Zero(2, 2));
    CHECK(theta(Vec::Zero(2), Mat::Zero(2, 2), b, moment) ==
          doctest::Approx(0.5 * b.dot(sigma * b)).epsilon(1e-12));

    // A_s F + b_s/2 = 0 gives exactly zero.
    CHECK(theta(vec2(3.0, -2.0), Mat::Zero(2, 2), Vec::Zero(2), moment) == 0.0);

    // Scalar: Sigma = 0.01 (sigma^2 dt), b_s = 50 -> 0.5 * 50^2 * 0.01 = 12.5.
    const auto m1 = make_exp_quad_moment(mat1(0.01), mat1(0.0));
    CHECK(theta(vec1(0.0), mat1(0.0), vec1(50.0), m1) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("theta is nonnegative") {
    NormalStream rng(3);
    const Mat a_s = 10.0 * pendulum_quad();
    const auto moment = make_exp_quad_moment(pendulum_sigma(), a_s);
    for (int i = 0; i < 200; ++i) {
        const Vec f = vec2(rng.next(), rng.next());
        CHECK(theta(f, a_s, Vec::Zero(2), moment) >= 0.0);
    }
}

TEST_CASE("expected_exp_neg_quadratic closed forms") {
    // Scalar lognormal moment: E[exp(-w)] = exp(sigma^2/2) at F = 0.
    const QuadraticBarrier line(Mat::Zero(1, 1), vec1(1.0), 0.0);
    CHECK(expected_exp_neg_quadratic(line, mat1(1.0), vec1(0.0)) ==
          doctest::Approx(std::exp(0.5)).epsilon(1e-12));

    // Constant barrier: deterministic value exp(-a*c), exactly.
    const QuadraticBarrier constant(Mat::Zero(1, 1), Vec::Zero(1), 0.8, 3.0, 0.8);
    CHECK(expected_exp_neg_quadratic(constant, mat1(0.5), vec1(2.0)) == std::exp(-3.0 * 0.8));

    // Pendulum barrier at scale 10, F = 0: oracle agreement within 3 SE.
    const QuadraticBarrier pend(pendulum_quad(), Vec::Zero(2), 1.0, 10.0, 1.0);
    const double closed = expected_exp_neg_quadratic(pend, pendulum_sigma(), Vec::Zero(2));
    const auto mc = mc_expectation_oracle(
        [&](const Vec& w) { return std::exp(-pend.scaled_value(w)); }, pendulum_sigma(),
        1'000'000, 424242);
    CHECK(std::abs(closed - mc.estimate) <= 3.0 * mc.std_error);
}

TEST_CASE("expected_exp_neg_quadratic stays positive and has a log companion") {
    NormalStream rng(7);
    const QuadraticBarrier pend(pendulum_quad(), Vec::Zero(2), 1.0, 10.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Vec f = vec2(0.5 * rng.next(), 0.5 * rng.next());
        const double log_val = log_expected_exp_neg_quadratic(pend, pendulum_sigma(), f);
        CHECK(std::isfinite(log_val));
        CHECK(expected_exp_neg_quadratic(pend, pendulum_sigma(), f) > 0.0);
        CHECK(expected_exp_neg_quadratic(pend, pendulum_sigma(), f) ==
              doctest::Approx(std::exp(log_val)));
    }
}

TEST_CASE("expected_square_centered_quadratic closed forms") {
    CHECK(expected_square_centered_quadratic(Mat::Zero(2, 2), Mat::Identity(2, 2),
                                             vec2(1.0, 2.0)) == 0.0);

    // E[(w'w)^2] = n^2 + 2n = 8 for a 2D standard normal.
    CHECK(expected_square_centered_quadratic(Mat::Identity(2, 2), Mat::Identity(2, 2),
                                             Vec::Zero(2)) == doctest::Approx(8.0));

    const Vec f = vec2(0.1, 0.05);
    const double closed = expected_square_centered_quadratic(pendulum_quad(), pendulum_sigma(), f);
    const auto mc = mc_expectation_oracle(
        [&](const Vec& w) {
            const Vec y = f + w;
            const double q = y.dot(pendulum_quad() * y);
            return q * q;
        },
        pendulum_sigma(), 1'000'000, 99991);
    CHECK(std::abs(closed - mc.estimate) <= 3.0 * mc.std_error);
}

TEST_CASE("mc_expectation_oracle basics") {
    const auto constant =
        mc_expectation_oracle([](const Vec&) { return 1.0; }, mat1(1.0), 10'000, 5);
    CHECK(constant.estimate == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(constant.std_error == doctest::Approx(0.0));

    const auto mean =
        mc_expectation_oracle([](const Vec& w) { return w[0]; }, mat1(1.0), 1'000'000, 6);
    CHECK(std::abs(mean.estimate) <= 4.0 * mean.std_error);

    const auto lognormal = mc_expectation_oracle([](const Vec& w) { return std::exp(-w[0]); },
                                                 mat1(1.0), 1'000'000, 7);
    CHECK(std::abs(lognormal.estimate - std::exp(0.5)) <= 4.0 * lognormal.std_error);

    CHECK_THROWS_AS(mc_expectation_oracle([](const Vec&) { return 1.0; }, mat1(1.0), 1, 1),
                    ContractViolation);
    CHECK_THROWS_AS(mc_expectation_oracle([](const Vec& w) { return std::log(w[0]); }, mat1(1.0),
                                          1000, 8),
                    ContractViolation);
}

TEST_CASE("oracle determinism per seed") {
    auto run = [] {
        return mc_expectation_oracle([](const Vec& w) { return std::exp(-w[0]); }, mat1(1.0),
                                     50'000, 12345);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("closed forms match the oracle on random states") {
    // Moderate scales keep the integrand light-tailed so the z-test is sound;
    // the full-scale algebra is covered by the exact scaling identity.
    NormalStream rng(2024);
    const Mat sigma = pendulum_sigma();
    for (int pair = 0; pair < 20; ++pair) {
        const double scale = 1.0 + 9.0 * rng.next_uniform();
        const QuadraticBarrier bar(pendulum_quad(), Vec::Zero(2), 1.0, scale, 1.0);
        const Vec f = vec2(0.3 * rng.next(), 0.3 * rng.next());
        const std::uint64_t seed = 1000 + pair;

        const double closed = expected_exp_neg_quadratic(bar, sigma, f);
        const auto mc = mc_expectation_oracle(
            [&](const Vec& w) { return std::exp(-bar.scaled_value(f + w)); }, sigma, 200'000,
            seed);
        CHECK(std::abs(closed - mc.estimate) <= 4.0 * mc.std_error);

        const double closed_sq = expected_square_centered_quadratic(bar.quad(), sigma, f);
        const auto mc_sq = mc_expectation_oracle(
            [&](const Vec& w) {
                const Vec y = f + w;
                const double q = y.dot(bar.quad() * y);
                return q * q;
            },
            sigma, 200'000, seed + 500);
        CHECK(std::abs(closed_sq - mc_sq.estimate) <= 4.0 * mc_sq.std_error);
    }
}

TEST_CASE("moment is nondecreasing in the scale for unsafe states") {
    // For negative semidefinite A and h(F) < 0, larger scales can only grow
    // E[exp(-a h(F+w))].
    const Vec f = vec2(0.55, 0.1);  // outside the pendulum safe set
    const QuadraticBarrier probe(pendulum_quad(), Vec::Zero(2), 1.0, 1.0, 1.0);
    REQUIRE(probe.value(f) < 0.0);
    double prev = 0.0;
    for (double a = 1.0; a <= 50.0; a += 1.0) {
        const QuadraticBarrier bar(pendulum_quad(), Vec::Zero(2), 1.0, a, 1.0);
        const double val = log_expected_exp_neg_quadratic(bar, pendulum_sigma(), f);
        if (a > 1.0) CHECK(val >= prev - 1e-12);
        prev = val;
    }
}
