#pragma once

#include <optional>
#include <variant>

#include "stochcbf/core_types.hpp"
#include "stochcbf/gaussian_moments.hpp"

namespace stochcbf {

// The four one-step condition families. Every residual below is >= 0 exactly
// when its condition holds at (x, u), so solvers can treat "residual >= 0" as
// the single feasibility contract.

/// E[h(F(x,u)+w)] >= alpha*h(x), alpha in (0,1). Needs an upper-bounded h for
/// its exit bound.
struct LinearZeroing {
    double alpha;
};

/// E[h(F(x,u)+w)] >= h(x) + beta, beta >= 0.
struct CMartingale {
    double beta;
};

/// E[(h(F(x,u)+w) - B)^2] <= (h(x) - B)^2 + beta for barriers of the form
/// h(x) = x'Ax + c with B = c.
struct PolynomialSquared {
    double beta;
    double bound;  // B
};

/// E[exp(-a*h(F(x,u)+w))] <= exp(-a*h(x)) + beta, evaluated through the
/// closed-form Gaussian moment of the scaled barrier.
struct ExpQuadratic {
    double beta;
};

struct CbfCondition {
    std::variant<LinearZeroing, CMartingale, PolynomialSquared, ExpQuadratic> family;
    int barrier_index = 0;
};

CbfCondition make_linear_zeroing(double alpha, int barrier_index = 0);
CbfCondition make_c_martingale(double beta, int barrier_index = 0);
CbfCondition make_polynomial_squared(double beta, double bound, int barrier_index = 0);
CbfCondition make_exp_quadratic(double beta, int barrier_index = 0);

std::string family_name(const CbfCondition& cond);

// Residual evaluators. All take the state x and a candidate input u and
// return a value that is >= 0 iff the condition holds.

double linear_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                 const QuadraticBarrier& bar, const Vec& x, const Vec& u);
double c_martingale_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                             const QuadraticBarrier& bar, const Vec& x, const Vec& u);
double polynomial_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                     const QuadraticBarrier& bar, const Vec& x, const Vec& u);
double exp_quadratic_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                        const QuadraticBarrier& bar, const Vec& x, const Vec& u);
/// Specialization of the exp-quadratic residual to affine barriers (A = 0);
/// algebraically identical to exp_quadratic_condition_residual in that case.
double affine_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                 const QuadraticBarrier& bar, const Vec& x, const Vec& u);

/// Dispatches to the family-specific residual.
double condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                          const QuadraticBarrier& bar, const Vec& x, const Vec& u);

/// Largest alpha keeping the linear condition feasible at the barrier maximum:
/// 1 + tr(A*Sigma). Throws AlphaOutOfRange unless tr(A*Sigma) is in (-1, 0).
double max_feasible_alpha(const QuadraticBarrier& bar, const Mat& sigma);

/// tr((A*Sigma)^2) + tr(A*Sigma)^2 for barriers of the form x'Ax + c.
double max_feasible_beta_poly(const QuadraticBarrier& bar, const Mat& sigma);

enum class Convexity { convex, not_certified };

/// Certifies convexity of the exp-quadratic safety-filter subproblem via
/// N = A_s - A_s Lambda^{-1} A_s: `convex` iff N is negative semidefinite
/// (eigenvalues <= 1e-10). A_s negative semidefinite is a sufficient case.
Convexity convexity_certificate(const QuadraticBarrier& bar, const Mat& sigma);

/// Exact quadratic polynomial u'Qu + p'u + r (used when a residual is exactly
/// quadratic in u; coefficients are extracted analytically, never by
/// differencing). Evaluation avoids temporaries for the small input
/// dimensions the solvers hammer on.
struct QuadraticInU {
    Mat q;
    Vec p;
    double r;

    double value(const Vec& u) const {
        switch (u.size()) {
            case 1:
                return (q(0, 0) * u[0] + p[0]) * u[0] + r;
            case 2:
                return (q(0, 0) * u[0] + 2.0 * q(0, 1) * u[1]) * u[0] + q(1, 1) * u[1] * u[1] +
                       p[0] * u[0] + p[1] * u[1] + r;
            default:
                return u.dot(q.selfadjointView<Eigen::Lower>() * u) + p.dot(u) + r;
        }
    }

    Vec gradient(const Vec& u) const {
        Vec g(u.size());
        switch (u.size()) {
            case 1:
                g[0] = 2.0 * q(0, 0) * u[0] + p[0];
                return g;
            case 2:
                g[0] = 2.0 * (q(0, 0) * u[0] + q(0, 1) * u[1]) + p[0];
                g[1] = 2.0 * (q(0, 1) * u[0] + q(1, 1) * u[1]) + p[1];
                return g;
            default:
                g.noalias() = 2.0 * (q * u) + p;
                return g;
        }
    }
};

/// Residual of one condition as a function of u at a fixed state, with
/// analytic derivatives and, when available, exact quadratic coefficients.
struct ResidualModel {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;
    std::optional<QuadraticInU> quadratic;
    bool certified_convex = false;  // u -> -residual(u) is convex
    int input_dim = 0;
};

ResidualModel make_residual_model(const CbfCondition& cond, const ControlAffineSystem& sys,
                                  const QuadraticBarrier& bar, const Vec& x);

/// log(exp(neg_scaled_h) + beta) without overflow for large |neg_scaled_h|;
/// exact (= neg_scaled_h) when beta == 0.
double log_exp_plus(double neg_scaled_h, double beta);

}  // namespace stochcbf
