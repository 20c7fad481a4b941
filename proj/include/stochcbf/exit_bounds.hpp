#pragma once

#include <iosfwd>

#include "stochcbf/scenario.hpp"

namespace stochcbf {

/// A K-step exit-probability bound. `raw` keeps the formula value even when it
/// exceeds 1 (vacuous); `reported` clamps to [0,1] for display. Acceptance
/// comparisons use raw values.
struct BoundReport {
    double raw = 0.0;
    double reported = 0.0;
    std::string family;
    int horizon = 0;
    Vec initial_state;
    std::vector<double> per_barrier_terms;  // raw per-barrier contributions (multi-CBF)
};

double clip_bound(double raw);

/// Generic maximal-inequality bound Phi(h(x0), 0) / min_k Phi(0, k).
double bound_general(double phi_at_x0, double phi_floor);

/// 1 - alpha^K * h(x0)/B for the zeroing condition; needs alpha in (0,1) and
/// 0 <= h_x0 <= B.
double bound_linear(double h_x0, double upper_bound, double alpha, int horizon);

/// 1 - (h(x0) - beta*K)/B for the c-martingale condition.
double bound_c_martingale(double h_x0, double upper_bound, double beta, int horizon);

/// ((h(x0) - B)^2 + K*beta) / B^2 for the squared-transform condition.
double bound_poly(double h_x0, double upper_bound, double beta, int horizon);

/// exp(-a*h(x0)) + K*beta for the exp-quadratic condition; takes the already
/// scaled barrier value.
double bound_exp_quad(double h_x0_scaled, double beta, int horizon);

/// Union bound: sum of per-barrier raw bounds.
double bound_boole(const std::vector<double>& per_barrier_bounds);

/// Bound for a scenario's condition set evaluated at its initial state.
BoundReport scenario_bound(const Scenario& scenario);
/// Same formula evaluated as if the scenario started at x0 with horizon K.
BoundReport scenario_bound_at(const Scenario& scenario, const Vec& x0, int horizon);

/// Rectangular evaluation grid, at most two axes. A one-axis grid fixes the
/// second coordinate at zero with n2 = 1.
struct GridSpec {
    double x1_min = 0.0, x1_max = 0.0;
    int n1 = 1;
    double x2_min = 0.0, x2_max = 0.0;
    int n2 = 1;
};

struct BoundGrid {
    GridSpec spec;
    std::vector<double> values;  // row-major over (i1, i2); NaN marks points outside C

    double at(int i1, int i2) const { return values[static_cast<std::size_t>(i1) * spec.n2 + i2]; }
};

/// Evaluates the scenario's bound formula at every grid point treated as the
/// initial state; points outside the safe set get the NaN sentinel.
BoundGrid bound_grid(const Scenario& scenario, const GridSpec& spec, int horizon);

/// CSV with header `x1,x2,bound`; unsafe points leave the bound field blank.
void write_grid_csv(const BoundGrid& grid, std::ostream& os);

}  // namespace stochcbf
