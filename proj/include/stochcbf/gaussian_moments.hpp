#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Cholesky>

#include "stochcbf/core_types.hpp"

namespace stochcbf {

/// Ingredients of the closed-form Gaussian expectation of exp(-h) for a
/// (scaled) quadratic barrier with quadratic coefficient A_s under noise
/// covariance Sigma:
///   lambda_mat   = 0.5*Sigma^{-1} + A_s   (must be positive definite)
///   log_det_term = 0.5*log det(I + 2*Sigma*A_s)
struct ExpQuadMoment {
    Mat lambda_mat;
    double log_det_term;
    Eigen::LLT<Mat> lambda_chol;  // factor of lambda_mat, reused by callers
};

/// Builds the moment ingredients; throws LambdaNotPd when the closed form does
/// not exist for this (Sigma, A_s) pair.
ExpQuadMoment make_exp_quad_moment(const Mat& sigma, const Mat& a_scaled);

/// 0.5*Sigma^{-1} + A_s. Throws LambdaNotPd when the result is not positive
/// definite (Cholesky failure is the test).
Mat lambda_matrix(const Mat& sigma, const Mat& a_scaled);

/// 0.5*log det(I + 2*Sigma*A_s); same existence condition as lambda_matrix.
double log_det_term(const Mat& sigma, const Mat& a_scaled);

/// Theta(F) = (A_s F + b_s/2)' Lambda^{-1} (A_s F + b_s/2), always >= 0.
double theta(const Vec& f_val, const Mat& a_scaled, const Vec& b_scaled,
             const ExpQuadMoment& moment);
double theta(const Vec& f_val, const Mat& a_scaled, const Vec& b_scaled, const Mat& lambda);

/// log E[exp(-a*h(F + w))] for w ~ N(0, Sigma), i.e. -a*h(F) + Theta - M.
/// Exponents can reach magnitude ~50 at the scales used here, so composition
/// happens in log space; exp is applied only at the interface.
double log_expected_exp_neg_quadratic(const QuadraticBarrier& bar, const Mat& sigma,
                                      const Vec& f_val);
double expected_exp_neg_quadratic(const QuadraticBarrier& bar, const Mat& sigma, const Vec& f_val);

/// E[((F+w)' A (F+w))^2] for w ~ N(0, Sigma):
///   (F'AF)^2 + 4 F'A Sigma A F + 2 F'AF tr(A Sigma)
///   + 2 tr((A Sigma)^2) + tr(A Sigma)^2.
double expected_square_centered_quadratic(const Mat& a, const Mat& sigma, const Vec& f_val);

struct McEstimate {
    double estimate;
    double std_error;
};

/// Sample mean and standard error of integrand(w) over n_samples i.i.d.
/// N(0, Sigma) draws. Deterministic for a fixed seed; throws on non-finite
/// integrand values, naming the offending sample.
McEstimate mc_expectation_oracle(const std::function<double(const Vec&)>& integrand,
                                 const Mat& sigma, std::int64_t n_samples, std::uint64_t seed);

}  // namespace stochcbf
