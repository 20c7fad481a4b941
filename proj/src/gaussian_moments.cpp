#include "stochcbf/gaussian_moments.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/LU>

namespace stochcbf {

namespace {

void check_square(const Mat& m, long n, const char* name) {
    if (m.rows() != n || m.cols() != n)
        throw ContractViolation(std::string(name) + ": wrong shape");
}

Eigen::LLT<Mat> chol_or_throw(const Mat& m, const char* what) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) throw LambdaNotPd(what);
    return llt;
}

}  // namespace

ExpQuadMoment make_exp_quad_moment(const Mat& sigma, const Mat& a_scaled) {
    const long n = sigma.rows();
    check_square(sigma, n, "sigma");
    check_square(a_scaled, n, "a_scaled");
    if (!is_symmetric(sigma)) throw ContractViolation("sigma is not symmetric");
    if (!is_symmetric(a_scaled)) throw ContractViolation("a_scaled is not symmetric");

    auto sigma_chol = chol_or_throw(sigma, "sigma is not positive definite");
    Mat lambda = 0.5 * sigma_chol.solve(Mat::Identity(n, n)) + a_scaled;
    lambda = (0.5 * (lambda + lambda.transpose())).eval();  // kill inversion round-off

    ExpQuadMoment out;
    out.lambda_mat = lambda;
    out.lambda_chol =
        chol_or_throw(lambda, "lambda = 0.5*Sigma^{-1} + A_s is not positive definite");
    // det(I + 2*Sigma*A_s) = det(Sigma)*det(2*Lambda) > 0 once Lambda is PD;
    // the pivoted-LU log-determinant of the small nonsymmetric matrix keeps
    // M exact at A_s = 0.
    const Mat inner = Mat::Identity(n, n) + 2.0 * sigma * a_scaled;
    Eigen::PartialPivLU<Mat> lu(inner);
    const Mat& u = lu.matrixLU();
    double log_abs_det = 0.0;
    double sign = lu.permutationP().determinant();
    for (long i = 0; i < n; ++i) {
        log_abs_det += std::log(std::abs(u(i, i)));
        sign *= u(i, i) >= 0.0 ? 1.0 : -1.0;
    }
    if (!(sign > 0.0) || !std::isfinite(log_abs_det))
        throw LambdaNotPd("det(I + 2*Sigma*A_s) is not positive");
    out.log_det_term = 0.5 * log_abs_det;
    return out;
}

Mat lambda_matrix(const Mat& sigma, const Mat& a_scaled) {
    return make_exp_quad_moment(sigma, a_scaled).lambda_mat;
}

double log_det_term(const Mat& sigma, const Mat& a_scaled) {
    return make_exp_quad_moment(sigma, a_scaled).log_det_term;
}

double theta(const Vec& f_val, const Mat& a_scaled, const Vec& b_scaled,
             const ExpQuadMoment& moment) {
    if (f_val.size() != a_scaled.rows() || b_scaled.size() != a_scaled.rows())
        throw ContractViolation("theta: dimension mismatch");
    const Vec v = a_scaled * f_val + 0.5 * b_scaled;
    return v.dot(moment.lambda_chol.solve(v));
}

double theta(const Vec& f_val, const Mat& a_scaled, const Vec& b_scaled, const Mat& lambda) {
    Eigen::LLT<Mat> llt(lambda);
    if (llt.info() != Eigen::Success) throw LambdaNotPd("theta: lambda is not positive definite");
    const Vec v = a_scaled * f_val + 0.5 * b_scaled;
    return v.dot(llt.solve(v));
}

double log_expected_exp_neg_quadratic(const QuadraticBarrier& bar, const Mat& sigma,
                                      const Vec& f_val) {
    const Mat a_s = bar.scaled_quad();
    const Vec b_s = bar.scaled_lin();
    const auto moment = make_exp_quad_moment(sigma, a_s);
    const double h_f_scaled = bar.scaled_value(f_val);
    return -h_f_scaled + theta(f_val, a_s, b_s, moment) - moment.log_det_term;
}

double expected_exp_neg_quadratic(const QuadraticBarrier& bar, const Mat& sigma,
                                  const Vec& f_val) {
    return std::exp(log_expected_exp_neg_quadratic(bar, sigma, f_val));
}

double expected_square_centered_quadratic(const Mat& a, const Mat& sigma, const Vec& f_val) {
    const long n = sigma.rows();
    check_square(a, n, "a");
    if (f_val.size() != n) throw ContractViolation("expected_square_centered_quadratic: bad F");
    const Mat a_sigma = a * sigma;
    const double s = f_val.dot(a * f_val);
    const double tr1 = a_sigma.trace();
    const double tr2 = (a_sigma * a_sigma).trace();
    const Vec af = a * f_val;
    return s * s + 4.0 * af.dot(sigma * af) + 2.0 * s * tr1 + 2.0 * tr2 + tr1 * tr1;
}

McEstimate mc_expectation_oracle(const std::function<double(const Vec&)>& integrand,
                                 const Mat& sigma, std::int64_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw ContractViolation("mc_expectation_oracle: n_samples must be >= 2");
    GaussianNoise noise(sigma);
    NormalStream stream(seed);
    const Mat& chol = noise.chol_lower();
    const long dim = chol.rows();
    Vec z(dim), w(dim);

    // Welford accumulation keeps the variance update stable over 1e6+ samples.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) {
        for (long d = 0; d < dim; ++d) z[d] = stream.next();
        w.noalias() = chol * z;
        const double v = integrand(w);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "mc_expectation_oracle: non-finite integrand at sample " << i << " (w = ["
               << w.transpose() << "])";
            throw ContractViolation(os.str());
        }
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = m2 / static_cast<double>(n_samples - 1);
    return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

}  // namespace stochcbf
