#include "stochcbf/exit_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace stochcbf {

double clip_bound(double raw) { return std::clamp(raw, 0.0, 1.0); }

double bound_general(double phi_at_x0, double phi_floor) {
    if (!(phi_floor > 0.0)) throw ContractViolation("bound_general: Phi floor must be positive");
    return phi_at_x0 / phi_floor;
}

double bound_linear(double h_x0, double upper_bound, double alpha, int horizon) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ContractViolation("bound_linear: alpha must lie in (0,1)");
    if (!(h_x0 >= 0.0 && h_x0 <= upper_bound))
        throw ContractViolation("bound_linear: needs 0 <= h(x0) <= B");
    if (horizon < 0) throw ContractViolation("bound_linear: negative horizon");
    return 1.0 - std::pow(alpha, horizon) * h_x0 / upper_bound;
}

double bound_c_martingale(double h_x0, double upper_bound, double beta, int horizon) {
    if (!(upper_bound > 0.0)) throw ContractViolation("bound_c_martingale: B must be positive");
    return 1.0 - (h_x0 - beta * horizon) / upper_bound;
}

double bound_poly(double h_x0, double upper_bound, double beta, int horizon) {
    if (!(upper_bound > 0.0)) throw ContractViolation("bound_poly: B must be positive");
    const double dev = h_x0 - upper_bound;
    return (dev * dev + horizon * beta) / (upper_bound * upper_bound);
}

double bound_exp_quad(double h_x0_scaled, double beta, int horizon) {
    if (!(beta >= 0.0)) throw ContractViolation("bound_exp_quad: beta must be >= 0");
    return std::exp(-h_x0_scaled) + horizon * beta;
}

double bound_boole(const std::vector<double>& per_barrier_bounds) {
    if (per_barrier_bounds.empty()) throw ContractViolation("bound_boole: empty bound list");
    double sum = 0.0;
    for (double b : per_barrier_bounds) {
        if (!(b >= 0.0)) throw ContractViolation("bound_boole: bounds must be >= 0");
        sum += b;
    }
    return sum;
}

namespace {

double one_barrier_bound(const CbfCondition& cond, const QuadraticBarrier& bar, const Vec& x0,
                         int horizon) {
    const double h0 = bar.value(x0);
    if (const auto* lin = std::get_if<LinearZeroing>(&cond.family))
        return bound_linear(h0, *bar.upper_bound(), lin->alpha, horizon);
    if (const auto* cm = std::get_if<CMartingale>(&cond.family))
        return bound_c_martingale(h0, *bar.upper_bound(), cm->beta, horizon);
    if (const auto* p = std::get_if<PolynomialSquared>(&cond.family))
        return bound_poly(h0, p->bound, p->beta, horizon);
    const auto& eq = std::get<ExpQuadratic>(cond.family);
    return bound_exp_quad(bar.scaled_value(x0), eq.beta, horizon);
}

}  // namespace

BoundReport scenario_bound_at(const Scenario& s, const Vec& x0, int horizon) {
    BoundReport report;
    report.horizon = horizon;
    report.initial_state = x0;
    for (const auto& cond : s.conditions) {
        const auto& bar = s.safe_set.barriers().at(cond.barrier_index);
        report.per_barrier_terms.push_back(one_barrier_bound(cond, bar, x0, horizon));
    }
    report.family = family_name(s.conditions.front());
    if (s.conditions.size() == 1) {
        report.raw = report.per_barrier_terms.front();
    } else {
        report.family = "boole(" + report.family + ")";
        report.raw = bound_boole(report.per_barrier_terms);
    }
    report.reported = clip_bound(report.raw);
    return report;
}

BoundReport scenario_bound(const Scenario& s) {
    return scenario_bound_at(s, s.initial_state, s.horizon);
}

BoundGrid bound_grid(const Scenario& s, const GridSpec& spec, int horizon) {
    if (spec.n1 < 1 || spec.n2 < 1) throw ContractViolation("bound_grid: empty grid");
    if (s.system.state_dim() > 2)
        throw ContractViolation("bound_grid: grids cover at most two state dimensions");
    BoundGrid grid;
    grid.spec = spec;
    grid.values.resize(static_cast<std::size_t>(spec.n1) * spec.n2);
    const int dim = s.system.state_dim();
    for (int i = 0; i < spec.n1; ++i) {
        const double x1 =
            spec.n1 == 1 ? spec.x1_min
                         : spec.x1_min + (spec.x1_max - spec.x1_min) * i / (spec.n1 - 1.0);
        for (int j = 0; j < spec.n2; ++j) {
            const double x2 =
                spec.n2 == 1 ? spec.x2_min
                             : spec.x2_min + (spec.x2_max - spec.x2_min) * j / (spec.n2 - 1.0);
            Vec x(dim);
            if (dim == 1)
                x << x1;
            else
                x << x1, x2;
            double& out = grid.values[static_cast<std::size_t>(i) * spec.n2 + j];
            if (!s.safe_set.contains(x)) {
                out = std::numeric_limits<double>::quiet_NaN();
            } else {
                out = clip_bound(scenario_bound_at(s, x, horizon).raw);
            }
        }
    }
    return grid;
}

void write_grid_csv(const BoundGrid& grid, std::ostream& os) {
    os << std::setprecision(17);
    os << "x1,x2,bound\n";
    const auto& spec = grid.spec;
    for (int i = 0; i < spec.n1; ++i) {
        const double x1 =
            spec.n1 == 1 ? spec.x1_min
                         : spec.x1_min + (spec.x1_max - spec.x1_min) * i / (spec.n1 - 1.0);
        for (int j = 0; j < spec.n2; ++j) {
            const double x2 =
                spec.n2 == 1 ? spec.x2_min
                             : spec.x2_min + (spec.x2_max - spec.x2_min) * j / (spec.n2 - 1.0);
            const double v = grid.at(i, j);
            os << x1 << ',' << x2 << ',';
            if (std::isnan(v))
                os << '\n';
            else
                os << v << '\n';
        }
    }
}

}  // namespace stochcbf
