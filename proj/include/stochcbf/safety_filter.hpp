#pragma once

#include "stochcbf/cbf_constraints.hpp"

namespace stochcbf {

enum class SolverStatus { analytic, kkt_converged, multistart_best, infeasible_fallback };
enum class FallbackPolicy { error, max_residual };

struct SolverOptions {
    double feasibility_tol = 1e-8;   // accepted constraint violation at the solution
    double kkt_tol = 1e-10;          // |residual| target on the active constraint
    int max_kkt_iterations = 200;    // multiplier iterations
    int multistart_extra = 4;        // low-discrepancy starts beyond u_nom and the axis pattern
    double multistart_radius_scale = 5.0;  // start radius = scale * (1 + |u_nom|)
    FallbackPolicy fallback = FallbackPolicy::error;
};

struct FilterResult {
    Vec u_star;
    double residual_at_solution = 0.0;
    SolverStatus status = SolverStatus::analytic;
    int iterations = 0;
    double distance = 0.0;  // |u_star - u_nom|
};

const char* solver_status_name(SolverStatus s);

/// Minimal-deviation safety filter: argmin |u - u_nom|^2 subject to the
/// condition residual >= 0 at state x. Returns u_nom untouched when feasible;
/// otherwise dispatches to the exact scalar solver (m = 1, quadratic
/// residual), the KKT solver (certified convex) or multistart descent.
/// Throws Infeasible under the `error` fallback policy; under `max_residual`
/// returns the best-effort input with status infeasible_fallback.
FilterResult filter_step(const ControlAffineSystem& sys, const CbfCondition& cond,
                         const QuadraticBarrier& bar, const Vec& x, const Vec& u_nom,
                         const SolverOptions& opts = {});

/// Joint filter over several (condition, barrier) constraints: all residuals
/// must be nonnegative. Falls back to cyclic per-constraint projection when
/// the joint descent stalls.
FilterResult filter_step_joint(const ControlAffineSystem& sys,
                               const std::vector<CbfCondition>& conds, const SafeSet& safe_set,
                               const Vec& x, const Vec& u_nom, const SolverOptions& opts = {});

/// Exact solver for scalar quadratic/affine residuals: the feasible set is a
/// root interval, so the optimum is u_nom clamped to the nearest endpoint.
FilterResult solve_scalar_interval(const QuadraticInU& residual, double u_nom,
                                   const SolverOptions& opts = {});

/// Single-constraint KKT solver for certified-convex residuals. Finds the
/// multiplier mu >= 0 with residual(u(mu)) = 0 where u(mu) minimizes
/// |u - u_nom|^2 - mu*residual(u); monotone in mu, solved by bisection.
FilterResult solve_convex_kkt(const ResidualModel& model, const Vec& u_nom,
                              const SolverOptions& opts = {});

/// Deterministic multistart projected descent for non-certified residuals:
/// 1 + 2m + extra starts (u_nom, axis perturbations, Halton points), each run
/// through feasibility ascent plus boundary sliding; returns the feasible
/// candidate closest to u_nom.
FilterResult solve_nonconvex_multistart(const std::vector<ResidualModel>& models,
                                        const Vec& u_nom, const SolverOptions& opts = {});

/// argmax_u residual(u) over the multistart pool (used for infeasibility
/// detection and the max_residual fallback).
Vec maximize_residual(const std::vector<ResidualModel>& models, const Vec& u_nom,
                      const SolverOptions& opts = {});

}  // namespace stochcbf
