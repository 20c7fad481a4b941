#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stochcbf/errors.hpp"
#include "stochcbf/rng.hpp"

namespace stochcbf {

/// Symmetry acceptance threshold for an n-by-n matrix:
/// max|Aij - Aji| <= 1e-12 * (1 + max|Aij|).
bool is_symmetric(const Mat& a);

/// Discrete-time control-affine system x_{k+1} = f(x_k) + g(x_k) u_k + w_k
/// with w_k ~ N(0, noise_cov). Immutable after construction.
class ControlAffineSystem {
public:
    using DriftFn = std::function<Vec(const Vec&)>;
    using InputMapFn = std::function<Mat(const Vec&)>;

    ControlAffineSystem(int state_dim, int input_dim, DriftFn drift, InputMapFn input_map,
                        Mat noise_cov);

    int state_dim() const { return state_dim_; }
    int input_dim() const { return input_dim_; }

    /// f(x); validates dimensions of argument and result.
    Vec drift(const Vec& x) const;
    /// g(x); validates dimensions of argument and result.
    Mat input_map(const Vec& x) const;

    const Mat& noise_cov() const { return noise_cov_; }
    const GaussianNoise& noise() const { return noise_; }

private:
    int state_dim_;
    int input_dim_;
    DriftFn drift_;
    InputMapFn input_map_;
    Mat noise_cov_;
    GaussianNoise noise_;
};

/// F(x,u) = f(x) + g(x) u, the noise-free one-step map.
Vec drift_eval(const ControlAffineSystem& sys, const Vec& x, const Vec& u);

/// Quadratic barrier h(x) = x'Ax + b'x + c with an optional scale a >= 1
/// (the scaled barrier a*h defines the same safe set) and an optional global
/// upper bound B with h(x) <= B, accepted only when it holds analytically.
class QuadraticBarrier {
public:
    QuadraticBarrier(Mat a, Vec b, double c, double scale = 1.0,
                     std::optional<double> upper_bound = std::nullopt);

    /// Unscaled h(x).
    double value(const Vec& x) const;
    /// scale * h(x).
    double scaled_value(const Vec& x) const { return scale_ * value(x); }

    const Mat& quad() const { return a_; }
    const Vec& lin() const { return b_; }
    double constant() const { return c_; }
    double scale() const { return scale_; }
    std::optional<double> upper_bound() const { return upper_bound_; }
    int dim() const { return static_cast<int>(b_.size()); }

    bool is_affine() const { return quad_is_zero_; }

    Mat scaled_quad() const { return scale_ * a_; }
    Vec scaled_lin() const { return scale_ * b_; }
    double scaled_constant() const { return scale_ * c_; }

private:
    Mat a_;
    Vec b_;
    double c_;
    double scale_;
    std::optional<double> upper_bound_;
    bool quad_is_zero_;
};

/// h(x) for the unscaled barrier.
double barrier_eval(const QuadraticBarrier& bar, const Vec& x);

/// Safe set C = {x : h_i(x) >= 0 for every barrier i}. Boundary points count
/// as safe.
class SafeSet {
public:
    explicit SafeSet(std::vector<QuadraticBarrier> barriers);

    const std::vector<QuadraticBarrier>& barriers() const { return barriers_; }
    int size() const { return static_cast<int>(barriers_.size()); }
    int dim() const { return barriers_.front().dim(); }

    double min_barrier_value(const Vec& x) const;
    bool contains(const Vec& x) const { return min_barrier_value(x) >= 0.0; }

private:
    std::vector<QuadraticBarrier> barriers_;
};

bool safe_set_contains(const SafeSet& s, const Vec& x);

/// Named dynamics for (de)serialization. Built-in types: "integrator_1d",
/// "pendulum", "single_integrator_2d". Further types may be registered at
/// runtime with register_dynamics before loading scenario files that use them.
struct DynamicsSpec {
    std::string type;
    double dt = 0.0;
};

using DynamicsFactory = std::function<ControlAffineSystem(const DynamicsSpec&, const Mat&)>;

ControlAffineSystem make_system(const DynamicsSpec& spec, const Mat& noise_cov);
void register_dynamics(const std::string& name, DynamicsFactory factory);
bool dynamics_registered(const std::string& name);

/// Nominal feedback policy u_nom(k, x). Tagged so scenarios round-trip through
/// JSON; "custom" policies carry a registered name. input_dim is stamped in
/// when the policy is attached to a scenario.
struct NominalPolicy {
    std::string type;   // "zero" | "negate_state" | "goal_seeking" | registered custom
    Vec goal;           // used by goal_seeking: u = -(x - goal)
    int input_dim = 0;  // m, needed by the zero policy

    Vec operator()(int k, const Vec& x) const;
};

using PolicyFn = std::function<Vec(int, const Vec&)>;
void register_policy(const std::string& name, PolicyFn fn);
bool policy_registered(const std::string& name);

}  // namespace stochcbf
