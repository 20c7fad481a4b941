#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "stochcbf/errors.hpp"

namespace stochcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Standard-normal stream with a pinned generation scheme: mt19937_64 drives
/// uniforms in (0,1], converted by Box-Muller. Identical seeds give identical
/// streams on every platform this library targets; the contract is per-seed
/// determinism, not bit-compatibility with other libraries.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    /// Next uniform double in (0,1], 53-bit resolution.
    double next_uniform() {
        // (x >> 11) is in [0, 2^53); add 1 so log() never sees zero.
        return static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
    }

    /// Next standard-normal variate.
    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * M_PI * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

private:
    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Zero-mean Gaussian sampler for a fixed SPD covariance; the Cholesky factor
/// is computed once and reused across draws.
class GaussianNoise {
public:
    explicit GaussianNoise(const Mat& sigma) : dim_(static_cast<int>(sigma.rows())) {
        Eigen::LLT<Mat> llt(sigma);
        if (llt.info() != Eigen::Success) {
            throw ContractViolation("GaussianNoise: covariance is not positive definite");
        }
        chol_lower_ = llt.matrixL();
    }

    Vec sample(NormalStream& stream) const {
        Vec z(dim_);
        for (int i = 0; i < dim_; ++i) z[i] = stream.next();
        return chol_lower_ * z;
    }

    const Mat& chol_lower() const { return chol_lower_; }
    int dim() const { return dim_; }

private:
    int dim_;
    Mat chol_lower_;
};

}  // namespace stochcbf
