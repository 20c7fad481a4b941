#include "stochcbf/core_types.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace stochcbf {

namespace {

constexpr double kPsdEigTol = 1e-10;

std::string dim_msg(const char* where, long got, long want) {
    std::ostringstream os;
    os << where << ": dimension mismatch (got " << got << ", expected " << want << ")";
    return os.str();
}

void check_finite(const Vec& v, const char* where) {
    if (!v.allFinite()) throw ContractViolation(std::string(where) + ": non-finite value");
}

}  // namespace

bool is_symmetric(const Mat& a) {
    if (a.rows() != a.cols()) return false;
    if (a.size() == 0) return true;
    const double scale = 1.0 + a.cwiseAbs().maxCoeff();
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

ControlAffineSystem::ControlAffineSystem(int state_dim, int input_dim, DriftFn drift,
                                         InputMapFn input_map, Mat noise_cov)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      drift_(std::move(drift)),
      input_map_(std::move(input_map)),
      noise_cov_(std::move(noise_cov)),
      noise_([&] {
          if (state_dim < 1 || input_dim < 1)
              throw ContractViolation("ControlAffineSystem: dimensions must be positive");
          if (noise_cov_.rows() != state_dim || noise_cov_.cols() != state_dim)
              throw ContractViolation("ControlAffineSystem: noise_cov has wrong shape");
          if (!is_symmetric(noise_cov_))
              throw ContractViolation("ControlAffineSystem: noise_cov is not symmetric");
          return GaussianNoise(noise_cov_);  // rejects non-PD covariances
      }()) {}

Vec ControlAffineSystem::drift(const Vec& x) const {
    if (x.size() != state_dim_) throw ContractViolation(dim_msg("drift", x.size(), state_dim_));
    Vec f = drift_(x);
    if (f.size() != state_dim_)
        throw ContractViolation(dim_msg("drift result", f.size(), state_dim_));
    check_finite(f, "drift");
    return f;
}

Mat ControlAffineSystem::input_map(const Vec& x) const {
    if (x.size() != state_dim_) throw ContractViolation(dim_msg("input_map", x.size(), state_dim_));
    Mat g = input_map_(x);
    if (g.rows() != state_dim_ || g.cols() != input_dim_)
        throw ContractViolation("input_map result: wrong shape");
    if (!g.allFinite()) throw ContractViolation("input_map: non-finite value");
    return g;
}

Vec drift_eval(const ControlAffineSystem& sys, const Vec& x, const Vec& u) {
    if (u.size() != sys.input_dim())
        throw ContractViolation(dim_msg("drift_eval input", u.size(), sys.input_dim()));
    return sys.drift(x) + sys.input_map(x) * u;
}

namespace {

// Supremum of h over R^n for NSD A with b in range(A): c - (1/4) b'A^+ b.
// Returns nullopt when h is unbounded above.
std::optional<double> quadratic_sup(const Mat& a, const Vec& b, double c) {
    if (a.cwiseAbs().maxCoeff() == 0.0) {
        if (b.cwiseAbs().maxCoeff() == 0.0) return c;
        return std::nullopt;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(a);
    const Vec evals = eig.eigenvalues();
    const double eig_scale = evals.cwiseAbs().maxCoeff();
    if (evals.maxCoeff() > kPsdEigTol * std::max(1.0, eig_scale)) return std::nullopt;  // not NSD
    // pseudo-inverse contraction: drop near-zero modes, but reject b with a
    // component along them (h grows linearly there).
    const Vec bt = eig.eigenvectors().transpose() * b;
    double quad_term = 0.0;
    for (int i = 0; i < evals.size(); ++i) {
        if (std::abs(evals[i]) <= kPsdEigTol * std::max(1.0, eig_scale)) {
            if (std::abs(bt[i]) > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) return std::nullopt;
        } else {
            quad_term += bt[i] * bt[i] / evals[i];
        }
    }
    return c - 0.25 * quad_term;
}

}  // namespace

QuadraticBarrier::QuadraticBarrier(Mat a, Vec b, double c, double scale,
                                   std::optional<double> upper_bound)
    : a_(std::move(a)), b_(std::move(b)), c_(c), scale_(scale), upper_bound_(upper_bound) {
    if (a_.rows() != b_.size() || a_.cols() != b_.size())
        throw ContractViolation("QuadraticBarrier: A and b shapes disagree");
    if (!is_symmetric(a_)) throw ContractViolation("QuadraticBarrier: A is not symmetric");
    if (!(scale_ >= 1.0)) throw ContractViolation("QuadraticBarrier: scale must be >= 1");
    quad_is_zero_ = a_.cwiseAbs().maxCoeff() == 0.0;
    if (upper_bound_) {
        const auto sup = quadratic_sup(a_, b_, c_);
        if (!sup)
            throw ContractViolation("QuadraticBarrier: h is unbounded above, upper_bound invalid");
        if (*upper_bound_ < *sup - 1e-12 * (1.0 + std::abs(*sup)))
            throw ContractViolation("QuadraticBarrier: upper_bound below sup h");
    }
}

double QuadraticBarrier::value(const Vec& x) const {
    if (x.size() != b_.size())
        throw ContractViolation(dim_msg("barrier_eval", x.size(), b_.size()));
    return x.dot(a_ * x) + b_.dot(x) + c_;
}

double barrier_eval(const QuadraticBarrier& bar, const Vec& x) { return bar.value(x); }

SafeSet::SafeSet(std::vector<QuadraticBarrier> barriers) : barriers_(std::move(barriers)) {
    if (barriers_.empty()) throw ContractViolation("SafeSet: needs at least one barrier");
    for (const auto& b : barriers_) {
        if (b.dim() != barriers_.front().dim())
            throw ContractViolation("SafeSet: barriers have mixed dimensions");
    }
}

double SafeSet::min_barrier_value(const Vec& x) const {
    double m = barriers_.front().value(x);
    for (std::size_t i = 1; i < barriers_.size(); ++i) m = std::min(m, barriers_[i].value(x));
    return m;
}

bool safe_set_contains(const SafeSet& s, const Vec& x) { return s.contains(x); }

namespace {

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, DynamicsFactory>& dynamics_registry() {
    static std::map<std::string, DynamicsFactory> reg;
    return reg;
}

std::map<std::string, PolicyFn>& policy_registry() {
    static std::map<std::string, PolicyFn> reg;
    return reg;
}

ControlAffineSystem make_builtin(const DynamicsSpec& spec, const Mat& noise_cov) {
    const double dt = spec.dt;
    if (!(dt > 0.0)) throw ContractViolation("DynamicsSpec: dt must be positive");
    if (spec.type == "integrator_1d") {
        // x_{k+1} = x + u*dt + w
        return ControlAffineSystem(
            1, 1, [](const Vec& x) { return x; },
            [dt](const Vec&) { return Mat::Constant(1, 1, dt); }, noise_cov);
    }
    if (spec.type == "pendulum") {
        // (theta, omega): theta' = theta + dt*omega, omega' = omega + dt*sin(theta) + dt*u
        return ControlAffineSystem(
            2, 1,
            [dt](const Vec& x) {
                Vec f(2);
                f << x[0] + dt * x[1], x[1] + dt * std::sin(x[0]);
                return f;
            },
            [dt](const Vec&) {
                Mat g(2, 1);
                g << 0.0, dt;
                return g;
            },
            noise_cov);
    }
    if (spec.type == "single_integrator_2d") {
        // x_{k+1} = x + u*dt + w, u in R^2
        return ControlAffineSystem(
            2, 2, [](const Vec& x) { return x; },
            [dt](const Vec&) { return Mat(dt * Mat::Identity(2, 2)); }, noise_cov);
    }
    throw ContractViolation("unknown dynamics type: " + spec.type);
}

}  // namespace

ControlAffineSystem make_system(const DynamicsSpec& spec, const Mat& noise_cov) {
    {
        std::lock_guard<std::mutex> lock(registry_mutex());
        auto it = dynamics_registry().find(spec.type);
        if (it != dynamics_registry().end()) return it->second(spec, noise_cov);
    }
    return make_builtin(spec, noise_cov);
}

void register_dynamics(const std::string& name, DynamicsFactory factory) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    dynamics_registry()[name] = std::move(factory);
}

bool dynamics_registered(const std::string& name) {
    if (name == "integrator_1d" || name == "pendulum" || name == "single_integrator_2d")
        return true;
    std::lock_guard<std::mutex> lock(registry_mutex());
    return dynamics_registry().count(name) > 0;
}

Vec NominalPolicy::operator()(int k, const Vec& x) const {
    if (type == "zero") {
        if (input_dim < 1) throw ContractViolation("zero policy: input_dim not set");
        return Vec::Zero(input_dim);
    }
    if (type == "negate_state") return -x;
    if (type == "goal_seeking") {
        if (goal.size() != x.size())
            throw ContractViolation("goal_seeking policy: goal dimension mismatch");
        return -(x - goal);
    }
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = policy_registry().find(type);
    if (it == policy_registry().end())
        throw ContractViolation("unknown nominal policy type: " + type);
    return it->second(k, x);
}

void register_policy(const std::string& name, PolicyFn fn) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    policy_registry()[name] = std::move(fn);
}

bool policy_registered(const std::string& name) {
    if (name == "zero" || name == "negate_state" || name == "goal_seeking") return true;
    std::lock_guard<std::mutex> lock(registry_mutex());
    return policy_registry().count(name) > 0;
}

}  // namespace stochcbf
