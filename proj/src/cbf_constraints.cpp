#include "stochcbf/cbf_constraints.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Eigenvalues>

namespace stochcbf {

namespace {

constexpr double kEigTol = 1e-10;

const LinearZeroing& as_linear(const CbfCondition& c) {
    if (const auto* f = std::get_if<LinearZeroing>(&c.family)) return *f;
    throw ContractViolation("condition is not LinearZeroing");
}
const CMartingale& as_cmart(const CbfCondition& c) {
    if (const auto* f = std::get_if<CMartingale>(&c.family)) return *f;
    throw ContractViolation("condition is not CMartingale");
}
const PolynomialSquared& as_poly(const CbfCondition& c) {
    if (const auto* f = std::get_if<PolynomialSquared>(&c.family)) return *f;
    throw ContractViolation("condition is not PolynomialSquared");
}
const ExpQuadratic& as_expquad(const CbfCondition& c) {
    if (const auto* f = std::get_if<ExpQuadratic>(&c.family)) return *f;
    throw ContractViolation("condition is not ExpQuadratic");
}

void require_poly_form(const QuadraticBarrier& bar, double bound) {
    if (bar.lin().cwiseAbs().maxCoeff() != 0.0)
        throw UnsupportedBarrierForm("squared-transform condition needs h(x) = x'Ax + c (b = 0)");
    if (bound != bar.constant())
        throw UnsupportedBarrierForm("squared-transform condition needs B = c");
    if (!bar.upper_bound() || *bar.upper_bound() != bound)
        throw UnsupportedBarrierForm("squared-transform condition needs upper_bound set to B");
}

bool nsd(const Mat& m) {
    if (m.size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Mat> eig(m);
    return eig.eigenvalues().maxCoeff() <= kEigTol;
}

}  // namespace

CbfCondition make_linear_zeroing(double alpha, int barrier_index) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ContractViolation("LinearZeroing: alpha must lie in (0,1)");
    return {LinearZeroing{alpha}, barrier_index};
}

CbfCondition make_c_martingale(double beta, int barrier_index) {
    if (!(beta >= 0.0)) throw ContractViolation("CMartingale: beta must be >= 0");
    return {CMartingale{beta}, barrier_index};
}

CbfCondition make_polynomial_squared(double beta, double bound, int barrier_index) {
    if (!(beta >= 0.0)) throw ContractViolation("PolynomialSquared: beta must be >= 0");
    return {PolynomialSquared{beta, bound}, barrier_index};
}

CbfCondition make_exp_quadratic(double beta, int barrier_index) {
    if (!(beta >= 0.0)) throw ContractViolation("ExpQuadratic: beta must be >= 0");
    return {ExpQuadratic{beta}, barrier_index};
}

std::string family_name(const CbfCondition& cond) {
    if (std::holds_alternative<LinearZeroing>(cond.family)) return "linear_zeroing";
    if (std::holds_alternative<CMartingale>(cond.family)) return "c_martingale";
    if (std::holds_alternative<PolynomialSquared>(cond.family)) return "polynomial_squared";
    return "exp_quadratic";
}

double log_exp_plus(double neg_scaled_h, double beta) {
    if (beta == 0.0) return neg_scaled_h;
    const double lb = std::log(beta);
    const double hi = std::max(neg_scaled_h, lb);
    const double lo = std::min(neg_scaled_h, lb);
    return hi + std::log1p(std::exp(lo - hi));
}

namespace {

// a*h(x) evaluated through the scaled coefficients, so a barrier with scale a
// and the same barrier pre-scaled by a produce bitwise-identical residuals.
double scaled_barrier_value(const Mat& a_s, const Vec& b_s, double c_s, const Vec& x) {
    return x.dot(a_s * x) + b_s.dot(x) + c_s;
}

}  // namespace

double linear_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                 const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    const auto& fam = as_linear(cond);
    const Vec f = drift_eval(sys, x, u);
    // E[h(F+w)] = h(F) + tr(A*Sigma) for quadratic h and zero-mean w.
    const double tr = (bar.quad() * sys.noise_cov()).trace();
    return bar.value(f) + tr - fam.alpha * bar.value(x);
}

double c_martingale_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                             const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    const auto& fam = as_cmart(cond);
    const Vec f = drift_eval(sys, x, u);
    const double tr = (bar.quad() * sys.noise_cov()).trace();
    return bar.value(f) + tr - bar.value(x) - fam.beta;
}

double polynomial_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                     const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    const auto& fam = as_poly(cond);
    require_poly_form(bar, fam.bound);
    const Vec f = drift_eval(sys, x, u);
    const double dev = bar.value(x) - fam.bound;
    return dev * dev + fam.beta -
           expected_square_centered_quadratic(bar.quad(), sys.noise_cov(), f);
}

double exp_quadratic_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                        const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    const auto& fam = as_expquad(cond);
    const Mat a_s = bar.scaled_quad();
    const Vec b_s = bar.scaled_lin();
    const double c_s = bar.scaled_constant();
    const auto moment = make_exp_quad_moment(sys.noise_cov(), a_s);
    const Vec f = drift_eval(sys, x, u);
    return scaled_barrier_value(a_s, b_s, c_s, f) - theta(f, a_s, b_s, moment) +
           log_exp_plus(-scaled_barrier_value(a_s, b_s, c_s, x), fam.beta) +
           moment.log_det_term;
}

double affine_condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                                 const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    const auto& fam = as_expquad(cond);
    if (!bar.is_affine())
        throw UnsupportedBarrierForm("affine_condition_residual needs A = 0");
    const Mat a_s = bar.scaled_quad();
    const Vec b_s = bar.scaled_lin();
    const double c_s = bar.scaled_constant();
    const Vec f = drift_eval(sys, x, u);
    const double half_bsb = 0.5 * b_s.dot(sys.noise_cov() * b_s);
    return scaled_barrier_value(a_s, b_s, c_s, f) +
           log_exp_plus(-scaled_barrier_value(a_s, b_s, c_s, x), fam.beta) - half_bsb;
}

double condition_residual(const CbfCondition& cond, const ControlAffineSystem& sys,
                          const QuadraticBarrier& bar, const Vec& x, const Vec& u) {
    return std::visit(
        [&](const auto& fam) -> double {
            using T = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<T, LinearZeroing>)
                return linear_condition_residual(cond, sys, bar, x, u);
            else if constexpr (std::is_same_v<T, CMartingale>)
                return c_martingale_residual(cond, sys, bar, x, u);
            else if constexpr (std::is_same_v<T, PolynomialSquared>)
                return polynomial_condition_residual(cond, sys, bar, x, u);
            else
                return exp_quadratic_condition_residual(cond, sys, bar, x, u);
        },
        cond.family);
}

double max_feasible_alpha(const QuadraticBarrier& bar, const Mat& sigma) {
    const double tr = (bar.quad() * sigma).trace();
    if (!(tr > -1.0 && tr < 0.0))
        throw AlphaOutOfRange("1 + tr(A*Sigma) falls outside (0,1)");
    return 1.0 + tr;
}

double max_feasible_beta_poly(const QuadraticBarrier& bar, const Mat& sigma) {
    if (bar.lin().cwiseAbs().maxCoeff() != 0.0)
        throw UnsupportedBarrierForm("max_feasible_beta_poly needs h(x) = x'Ax + c");
    const Mat as = bar.quad() * sigma;
    const double tr1 = as.trace();
    const double tr2 = (as * as).trace();
    return tr2 + tr1 * tr1;
}

Convexity convexity_certificate(const QuadraticBarrier& bar, const Mat& sigma) {
    const Mat a_s = bar.scaled_quad();
    const auto moment = make_exp_quad_moment(sigma, a_s);
    const Mat n = a_s - a_s * moment.lambda_chol.solve(a_s);
    return nsd(0.5 * (n + n.transpose())) ? Convexity::convex : Convexity::not_certified;
}

namespace {

// Exact quadratic coefficients of u -> h-type residuals through F = f + G u.
QuadraticInU quadratic_through_drift(const Mat& quad_f, const Vec& lin_f, double const_f,
                                     const Vec& f, const Mat& g) {
    QuadraticInU out;
    out.q = g.transpose() * quad_f * g;
    out.q = (0.5 * (out.q + out.q.transpose())).eval();
    out.p = g.transpose() * (2.0 * (quad_f * f) + lin_f);
    out.r = f.dot(quad_f * f) + lin_f.dot(f) + const_f;
    return out;
}

ResidualModel model_from_quadratic(QuadraticInU quad, int m) {
    ResidualModel model;
    model.input_dim = m;
    model.certified_convex = nsd(quad.q);
    auto q = std::make_shared<QuadraticInU>(std::move(quad));
    model.value = [q](const Vec& u) { return q->value(u); };
    model.gradient = [q](const Vec& u) { return q->gradient(u); };
    model.hessian = [q](const Vec&) { return Mat(2.0 * q->q); };
    model.quadratic = *q;
    return model;
}

}  // namespace

ResidualModel make_residual_model(const CbfCondition& cond, const ControlAffineSystem& sys,
                                  const QuadraticBarrier& bar, const Vec& x) {
    const Vec f = sys.drift(x);
    const Mat g = sys.input_map(x);
    const int m = sys.input_dim();
    const Mat& sigma = sys.noise_cov();

    if (const auto* lin = std::get_if<LinearZeroing>(&cond.family)) {
        const double tr = (bar.quad() * sigma).trace();
        const double c0 = bar.constant() + tr - lin->alpha * bar.value(x);
        return model_from_quadratic(quadratic_through_drift(bar.quad(), bar.lin(), c0, f, g), m);
    }
    if (const auto* cm = std::get_if<CMartingale>(&cond.family)) {
        const double tr = (bar.quad() * sigma).trace();
        const double c0 = bar.constant() + tr - bar.value(x) - cm->beta;
        return model_from_quadratic(quadratic_through_drift(bar.quad(), bar.lin(), c0, f, g), m);
    }
    if (const auto* eq = std::get_if<ExpQuadratic>(&cond.family)) {
        const Mat a_s = bar.scaled_quad();
        const Vec b_s = bar.scaled_lin();
        const auto moment = make_exp_quad_moment(sigma, a_s);
        // residual(F) = F'(A_s - A_s L^{-1} A_s)F + (b_s - A_s L^{-1} b_s)'F + const
        Mat n = a_s - a_s * moment.lambda_chol.solve(a_s);
        n = (0.5 * (n + n.transpose())).eval();
        const Vec n_lin = b_s - a_s * moment.lambda_chol.solve(b_s);
        const double c0 =
            bar.scaled_constant() - 0.25 * b_s.dot(moment.lambda_chol.solve(b_s)) +
            log_exp_plus(-scaled_barrier_value(a_s, b_s, bar.scaled_constant(), x), eq->beta) +
            moment.log_det_term;
        return model_from_quadratic(quadratic_through_drift(n, n_lin, c0, f, g), m);
    }

    const auto& fam = as_poly(cond);
    require_poly_form(bar, fam.bound);
    ResidualModel model;
    model.input_dim = m;
    const Mat a = bar.quad();
    const Mat a_sig_a = a * sigma * a;
    const double tr1 = (a * sigma).trace();
    const double tr2 = ((a * sigma) * (a * sigma)).trace();
    const double dev = bar.value(x) - fam.bound;
    const double c_slack = dev * dev + fam.beta;
    auto fv = std::make_shared<Vec>(f);
    auto gm = std::make_shared<Mat>(g);
    auto am = std::make_shared<Mat>(a);
    auto asam = std::make_shared<Mat>(a_sig_a);
    model.value = [=](const Vec& u) {
        const Vec F = *fv + *gm * u;
        const double s = F.dot(*am * F);
        const double e = s * s + 4.0 * F.dot(*asam * F) + 2.0 * s * tr1 + 2.0 * tr2 + tr1 * tr1;
        return c_slack - e;
    };
    model.gradient = [=](const Vec& u) {
        const Vec F = *fv + *gm * u;
        const double s = F.dot(*am * F);
        const Vec af = *am * F;
        const Vec grad_f = 4.0 * s * af + 8.0 * (*asam * F) + 4.0 * tr1 * af;
        return Vec(-(gm->transpose() * grad_f));
    };
    model.hessian = [=](const Vec& u) {
        const Vec F = *fv + *gm * u;
        const double s = F.dot(*am * F);
        const Vec af = *am * F;
        Mat h_f = 8.0 * (af * af.transpose()) + 4.0 * s * (*am) + 8.0 * (*asam) +
                  4.0 * tr1 * (*am);
        return Mat(-(gm->transpose() * h_f * *gm));
    };
    // Concave h (A nsd) with the convex square transform keeps the subproblem
    // convex.
    model.certified_convex = nsd(a);
    return model;
}

}  // namespace stochcbf
