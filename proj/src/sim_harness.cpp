#include "stochcbf/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

namespace stochcbf {

Vec sample_gaussian(const GaussianNoise& noise, NormalStream& stream) {
    return noise.sample(stream);
}

TrajectoryRecord simulate_trajectory(const Scenario& scenario, const SimOptions& opts,
                                     std::uint64_t seed) {
    TrajectoryRecord rec;
    rec.seed = seed;
    const int horizon = scenario.horizon;
    rec.states.reserve(horizon + 1);
    rec.inputs.reserve(horizon);
    rec.residuals.reserve(horizon);

    NormalStream stream(seed);
    const GaussianNoise& noise = scenario.system.noise();

    Vec x = scenario.initial_state;
    rec.states.push_back(x);
    if (!scenario.safe_set.contains(x)) rec.first_exit_step = 0;

    for (int k = 0; k < horizon; ++k) {
        const Vec u_nom = scenario.nominal_policy(k, x);
        Vec u;
        double residual;
        if (!rec.first_exit_step) {
            FilterResult fr;
            try {
                fr = filter_step_joint(scenario.system, scenario.conditions, scenario.safe_set, x,
                                       u_nom, opts.solver);
            } catch (const Infeasible& e) {
                throw Infeasible(std::string(e.what()) + " (trial seed " + std::to_string(seed) +
                                 ", step " + std::to_string(k) + ")");
            }
            if (fr.status == SolverStatus::infeasible_fallback) rec.tainted = true;
            u = fr.u_star;
            residual = fr.residual_at_solution;
        } else {
            // Post-exit: the nominal controller runs; the condition is only
            // defined on the safe set, the recorded value is diagnostic.
            u = u_nom;
            double r = std::numeric_limits<double>::infinity();
            for (const auto& c : scenario.conditions) {
                r = std::min(r, condition_residual(c, scenario.system,
                                                   scenario.safe_set.barriers()[c.barrier_index],
                                                   x, u));
            }
            residual = r;
        }
        Vec x_next = drift_eval(scenario.system, x, u);
        if (!opts.disable_noise) x_next += noise.sample(stream);

        rec.inputs.push_back(u);
        rec.residuals.push_back(residual);
        rec.states.push_back(x_next);
        if (!rec.first_exit_step && !scenario.safe_set.contains(x_next))
            rec.first_exit_step = k + 1;
        x = std::move(x_next);
    }
    return rec;
}

namespace {

double log_binom_pmf(int n, int k, double p) {
    const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    double lp = 0.0;
    if (k > 0) lp += k * std::log(p);
    if (n - k > 0) lp += (n - k) * std::log1p(-p);
    return lc + lp;
}

// P(X >= k) for X ~ Bin(n, p).
double binom_upper_tail(int n, int k, double p) {
    if (k <= 0) return 1.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double s = 0.0;
    for (int j = k; j <= n; ++j) s += std::exp(log_binom_pmf(n, j, p));
    return std::min(s, 1.0);
}

// P(X <= k).
double binom_lower_tail(int n, int k, double p) {
    if (k >= n) return 1.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return 0.0;
    double s = 0.0;
    for (int j = 0; j <= k; ++j) s += std::exp(log_binom_pmf(n, j, p));
    return std::min(s, 1.0);
}

}  // namespace

std::pair<double, double> clopper_pearson(int n_success, int n_trials, double confidence) {
    if (n_trials < 1 || n_success < 0 || n_success > n_trials)
        throw ContractViolation("clopper_pearson: bad counts");
    const double alpha = 1.0 - confidence;
    double lo = 0.0, hi = 1.0;
    if (n_success > 0) {
        // smallest p with P(X >= n_success | p) = alpha/2
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (binom_upper_tail(n_trials, n_success, mid) < alpha / 2.0 ? a : b) = mid;
        }
        lo = 0.5 * (a + b);
    }
    if (n_success < n_trials) {
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (binom_lower_tail(n_trials, n_success, mid) > alpha / 2.0 ? a : b) = mid;
        }
        hi = 0.5 * (a + b);
    }
    return {lo, hi};
}

namespace {

int resolve_threads(int max_threads, int n_trials) {
    int n = max_threads > 0 ? max_threads : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("STOCHCBF_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return std::min(n, std::max(1, n_trials));
}

}  // namespace

EmpiricalResult run_monte_carlo(const Scenario& scenario, const SimOptions& opts, int n_trials,
                                std::uint64_t base_seed, int max_threads,
                                std::vector<TrajectoryRecord>* records) {
    if (n_trials < 1) throw ContractViolation("run_monte_carlo: n_trials must be >= 1");

    struct TrialOutcome {
        bool exited = false;
        bool tainted = false;
    };
    std::vector<TrialOutcome> outcomes(n_trials);
    if (records) records->resize(n_trials);
    std::exception_ptr first_error;
    std::mutex error_mutex;

    const int n_threads = resolve_threads(max_threads, n_trials);
    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            try {
                TrajectoryRecord rec =
                    simulate_trajectory(scenario, opts, base_seed + static_cast<std::uint64_t>(i));
                outcomes[i].exited = rec.first_exit_step.has_value();
                outcomes[i].tainted = rec.tainted;
                if (records) (*records)[i] = std::move(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (n_threads == 1) {
        work(0, n_trials);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_trials + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(n_trials, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    EmpiricalResult res;
    res.n_trials = n_trials;
    for (const auto& o : outcomes) {
        res.n_exited += o.exited ? 1 : 0;
        res.n_tainted += o.tainted ? 1 : 0;
    }
    res.exit_frequency = static_cast<double>(res.n_exited) / n_trials;
    std::tie(res.cp_lo, res.cp_hi) = clopper_pearson(res.n_exited, n_trials);
    const BoundReport bound = scenario_bound(scenario);
    res.theoretical_bound = bound.reported;
    res.theoretical_bound_raw = bound.raw;
    res.bound_satisfied = res.cp_lo <= res.theoretical_bound;
    return res;
}

namespace {

// Phi-space one-step pair (lhs = E[Phi(h(F(x,u)+w), k+1)], rhs = Phi(h(x), k))
// for one condition family.
std::pair<double, double> phi_step(const CbfCondition& cond, const ControlAffineSystem& sys,
                                   const QuadraticBarrier& bar, int k, int horizon, const Vec& x,
                                   const Vec& u) {
    const Vec f = drift_eval(sys, x, u);
    const Mat& sigma = sys.noise_cov();
    if (const auto* lin = std::get_if<LinearZeroing>(&cond.family)) {
        const double b_up = *bar.upper_bound();
        const double mean_next = bar.value(f) + (bar.quad() * sigma).trace();
        const double lhs = std::pow(lin->alpha, -horizon) * b_up -
                           std::pow(lin->alpha, -(k + 1)) * mean_next;
        const double rhs =
            std::pow(lin->alpha, -horizon) * b_up - std::pow(lin->alpha, -k) * bar.value(x);
        return {lhs, rhs};
    }
    if (const auto* cm = std::get_if<CMartingale>(&cond.family)) {
        const double b_up = *bar.upper_bound();
        const double mean_next = bar.value(f) + (bar.quad() * sigma).trace();
        return {b_up - mean_next + (horizon - k - 1) * cm->beta,
                b_up - bar.value(x) + (horizon - k) * cm->beta};
    }
    if (const auto* p = std::get_if<PolynomialSquared>(&cond.family)) {
        const double lhs = expected_square_centered_quadratic(bar.quad(), sigma, f) +
                           (horizon - k - 1) * p->beta;
        const double dev = bar.value(x) - p->bound;
        return {lhs, dev * dev + (horizon - k) * p->beta};
    }
    const auto& eq = std::get<ExpQuadratic>(cond.family);
    const double lhs = expected_exp_neg_quadratic(bar, sigma, f) + (horizon - k - 1) * eq.beta;
    const double rhs = std::exp(-bar.scaled_value(x)) + (horizon - k) * eq.beta;
    return {lhs, rhs};
}

}  // namespace

std::vector<AuditEntry> audit_supermartingale(const TrajectoryRecord& record,
                                              const Scenario& scenario) {
    std::vector<AuditEntry> out;
    const int n_steps = static_cast<int>(record.inputs.size());
    const int last = record.first_exit_step ? std::min(*record.first_exit_step, n_steps) : n_steps;
    for (int k = 0; k < last; ++k) {
        for (const auto& cond : scenario.conditions) {
            const auto& bar = scenario.safe_set.barriers()[cond.barrier_index];
            const auto [lhs, rhs] = phi_step(cond, scenario.system, bar, k, scenario.horizon,
                                             record.states[k], record.inputs[k]);
            out.push_back({k, cond.barrier_index, lhs, rhs, lhs <= rhs + 1e-8});
        }
    }
    return out;
}

void write_trajectory_csv(const TrajectoryRecord& record, const Scenario& scenario,
                          std::ostream& os, bool header) {
    const int n = scenario.system.state_dim();
    const int m = scenario.system.input_dim();
    os << std::setprecision(17);
    if (header) {
        os << 'k';
        for (int i = 1; i <= n; ++i) os << ",x" << i;
        for (int i = 1; i <= m; ++i) os << ",u" << i;
        os << ",residual,exited\n";
    }
    const int steps = static_cast<int>(record.states.size());
    for (int k = 0; k < steps; ++k) {
        os << k;
        for (int i = 0; i < n; ++i) os << ',' << record.states[k][i];
        if (k < static_cast<int>(record.inputs.size())) {
            for (int i = 0; i < m; ++i) os << ',' << record.inputs[k][i];
            os << ',' << record.residuals[k];
        } else {
            for (int i = 0; i < m; ++i) os << ',' << "nan";
            os << ',' << "nan";
        }
        const bool outside = !scenario.safe_set.contains(record.states[k]);
        os << ',' << (outside ? 1 : 0) << '\n';
    }
}

}  // namespace stochcbf
