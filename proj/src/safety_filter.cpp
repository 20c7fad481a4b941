#include "stochcbf/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace stochcbf {

const char* solver_status_name(SolverStatus s) {
    switch (s) {
        case SolverStatus::analytic: return "analytic";
        case SolverStatus::kkt_converged: return "kkt_converged";
        case SolverStatus::multistart_best: return "multistart_best";
        case SolverStatus::infeasible_fallback: return "infeasible_fallback";
    }
    return "?";
}

namespace {

FilterResult nominal_result(const Vec& u_nom, double residual) {
    return {u_nom, residual, SolverStatus::analytic, 0, 0.0};
}

FilterResult finish(Vec u, double residual, SolverStatus status, int iters, const Vec& u_nom) {
    FilterResult out;
    out.distance = (u - u_nom).norm();
    out.u_star = std::move(u);
    out.residual_at_solution = residual;
    out.status = status;
    out.iterations = iters;
    return out;
}

double min_value(const std::vector<ResidualModel>& models, const Vec& u, int* which = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double v = models[i].value(u);
        if (v < best) {
            best = v;
            if (which) *which = static_cast<int>(i);
        }
    }
    return best;
}

double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

std::vector<Vec> multistart_points(const Vec& u_nom, const SolverOptions& opts) {
    const int m = static_cast<int>(u_nom.size());
    const double radius = opts.multistart_radius_scale * (1.0 + u_nom.norm());
    std::vector<Vec> starts;
    starts.push_back(u_nom);
    for (int j = 0; j < m; ++j) {
        Vec e = Vec::Zero(m);
        e[j] = radius;
        starts.push_back(u_nom + e);
        starts.push_back(u_nom - e);
    }
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    for (int k = 0; k < opts.multistart_extra; ++k) {
        Vec p(m);
        for (int j = 0; j < m; ++j)
            p[j] = radius * (2.0 * halton(k + 1, primes[j % 8]) - 1.0);
        starts.push_back(u_nom + p);
    }
    return starts;
}

// Gradient ascent on the pointwise-minimum residual until it is nonnegative
// or progress stalls. Returns the best point reached.
Vec ascend_to_feasibility(const std::vector<ResidualModel>& models, Vec u, const Vec& u_nom,
                          int max_iters, int* spent) {
    for (int it = 0; it < max_iters; ++it) {
        if (spent) ++(*spent);
        int i = 0;
        const double v = min_value(models, u, &i);
        if (v >= 0.0) break;
        const Vec g = models[i].gradient(u);
        const double gn = g.norm();
        if (gn < 1e-14) break;
        double t = (1.0 + u_nom.norm()) / std::max(1.0, gn);
        bool improved = false;
        for (int ls = 0; ls < 50; ++ls) {
            if (min_value(models, u + t * g) > v) {
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved) break;
        u += t * g;
    }
    return u;
}

}  // namespace

FilterResult solve_scalar_interval(const QuadraticInU& residual, double u_nom,
                                   const SolverOptions& opts) {
    if (residual.q.rows() != 1 || residual.p.size() != 1)
        throw ContractViolation("solve_scalar_interval: residual is not scalar");
    const double a2 = residual.q(0, 0);
    const double a1 = residual.p(0);
    const double a0 = residual.r;
    const double scale = std::max({std::abs(a2), std::abs(a1), std::abs(a0), 1.0});
    auto value = [&](double u) { return (a2 * u + a1) * u + a0; };
    auto result = [&](double u) {
        Vec us(1);
        us << u;
        Vec un(1);
        un << u_nom;
        return finish(us, value(u), SolverStatus::analytic, 0, un);
    };

    if (value(u_nom) >= 0.0) return result(u_nom);

    if (std::abs(a2) <= 1e-14 * scale) {
        if (std::abs(a1) <= 1e-14 * scale) throw Infeasible("scalar residual constant negative");
        return result(-a0 / a1);  // nearest endpoint of the feasible half-line
    }

    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (a2 > 0.0) {
        // Feasible outside the roots; u_nom infeasible means disc > 0 here.
        if (disc <= 0.0) return result(u_nom);
        const double sq = std::sqrt(disc);
        const double qf = -0.5 * (a1 + (a1 >= 0.0 ? sq : -sq));
        double r1 = qf / a2, r2 = a0 / qf;
        if (r1 > r2) std::swap(r1, r2);
        return result(u_nom - r1 <= r2 - u_nom ? r1 : r2);
    }
    // Concave parabola: feasible between the roots, if any.
    if (disc < 0.0) throw Infeasible("scalar residual negative everywhere");
    const double sq = std::sqrt(disc);
    const double qf = -0.5 * (a1 + (a1 >= 0.0 ? sq : -sq));
    double r1 = qf / a2, r2 = a0 / qf;
    if (r1 > r2) std::swap(r1, r2);
    return result(std::clamp(u_nom, r1, r2));
}

namespace {

// Minimizer of |u - u_nom|^2 - mu*residual(u) for concave residuals. Exact
// linear solve in the quadratic case; monotone-gradient bisection for scalar
// inputs; damped Newton otherwise.
Vec inner_minimize(const ResidualModel& model, const Vec& u_nom, double mu, const Vec& warm,
                   int* iters) {
    const int m = model.input_dim;
    if (model.quadratic) {
        const Mat lhs = Mat::Identity(m, m) - mu * model.quadratic->q;
        return Eigen::LDLT<Mat>(lhs).solve(u_nom + 0.5 * mu * model.quadratic->p);
    }
    if (m == 1) {
        // phi'(u) = 2(u - u_nom) - mu*residual'(u) is strictly increasing.
        auto dphi = [&](double u) {
            Vec uu(1);
            uu << u;
            return 2.0 * (u - u_nom[0]) - mu * model.gradient(uu)[0];
        };
        double lo = u_nom[0], hi = u_nom[0];
        double step = 1.0 + std::abs(u_nom[0]);
        for (int it = 0; it < 200 && dphi(lo) > 0.0; ++it, step *= 2.0) lo -= step;
        step = 1.0 + std::abs(u_nom[0]);
        for (int it = 0; it < 200 && dphi(hi) < 0.0; ++it, step *= 2.0) hi += step;
        if (!(std::isfinite(lo) && std::isfinite(hi)) || dphi(lo) > 0.0 || dphi(hi) < 0.0)
            throw NoConvergence("scalar KKT subproblem: no bracket for the stationary point");
        for (int it = 0; it < 200; ++it) {
            if (iters) ++(*iters);
            const double mid = 0.5 * (lo + hi);
            (dphi(mid) < 0.0 ? lo : hi) = mid;
            if (hi - lo <= 1e-15 * (1.0 + std::abs(hi))) break;
        }
        Vec out(1);
        out << 0.5 * (lo + hi);
        return out;
    }
    Vec u = warm;
    auto phi = [&](const Vec& v) { return (v - u_nom).squaredNorm() - mu * model.value(v); };
    for (int it = 0; it < 100; ++it) {
        if (iters) ++(*iters);
        const Vec grad = 2.0 * (u - u_nom) - mu * model.gradient(u);
        const double scale = 1.0 + 2.0 * (u - u_nom).norm() + mu * model.gradient(u).norm();
        if (grad.norm() <= 1e-12 * scale) return u;
        const Mat hess = 2.0 * Mat::Identity(m, m) - mu * model.hessian(u);
        Vec step = Eigen::LDLT<Mat>(hess).solve(-grad);
        double t = 1.0;
        const double f0 = phi(u);
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            if (phi(u + t * step) < f0) {
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) return u;  // phi differences are below rounding
        u += t * step;
    }
    const Vec grad = 2.0 * (u - u_nom) - mu * model.gradient(u);
    const double scale = 1.0 + 2.0 * (u - u_nom).norm() + mu * model.gradient(u).norm();
    if (grad.norm() > 1e-6 * scale)
        throw NoConvergence("inner Newton solve on the KKT subproblem stalled");
    return u;
}

}  // namespace

FilterResult solve_convex_kkt(const ResidualModel& model, const Vec& u_nom,
                              const SolverOptions& opts) {
    const double r_nom = model.value(u_nom);
    if (r_nom >= 0.0) return nominal_result(u_nom, r_nom);

    int iters = 0;
    Vec warm = u_nom;
    auto eval_mu = [&](double mu) {
        warm = inner_minimize(model, u_nom, mu, warm, &iters);
        return model.value(warm);
    };

    // Bracket the multiplier: psi(mu) = residual(u(mu)) is nondecreasing.
    double lo = 0.0, hi = 1.0;
    double psi_hi = eval_mu(hi);
    while (psi_hi < 0.0) {
        ++iters;
        lo = hi;
        hi *= 4.0;
        if (hi > 1e14) {
            // psi has plateaued at the residual's supremum.
            if (psi_hi >= -opts.feasibility_tol)
                return finish(warm, psi_hi, SolverStatus::kkt_converged, iters, u_nom);
            throw Infeasible("convex KKT: residual supremum is negative");
        }
        psi_hi = eval_mu(hi);
    }

    // Boundary polish: one or two Newton steps along the gradient pin the
    // residual to zero far below the bisection tolerance, tightening the
    // solution in u-space as well.
    const double step_tol = 1e-14 * (1.0 + u_nom.norm());
    auto polish = [&](Vec u) {
        for (int ps = 0; ps < 3; ++ps) {
            const double r = model.value(u);
            const Vec g = model.gradient(u);
            const double g2 = g.squaredNorm();
            if (g2 < 1e-28 || std::abs(r) / std::sqrt(g2) <= step_tol) break;
            const Vec cand = u - r * g / g2;
            if (std::abs(model.value(cand)) < std::abs(r))
                u = cand;
            else
                break;
        }
        return u;
    };

    Vec u_hi = warm;
    for (int it = 0; it < opts.max_kkt_iterations; ++it) {
        ++iters;
        const double mid = 0.5 * (lo + hi);
        const double psi_mid = eval_mu(mid);
        if (std::abs(psi_mid) <= opts.kkt_tol) {
            const Vec u = polish(warm);
            return finish(u, model.value(u), SolverStatus::kkt_converged, iters, u_nom);
        }
        if (psi_mid < 0.0) {
            lo = mid;
        } else {
            hi = mid;
            u_hi = warm;
        }
        if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
    }
    // Feasible side of the final bracket.
    const Vec u = polish(u_hi);
    return finish(u, model.value(u), SolverStatus::kkt_converged, iters, u_nom);
}

namespace {

struct LocalSolve {
    Vec best_feasible;        // empty when the start never reached feasibility
    Vec best_point;           // highest-residual point seen (fallback pool)
    double best_residual = -std::numeric_limits<double>::infinity();
};

LocalSolve local_descent(const std::vector<ResidualModel>& models, const Vec& start,
                         const Vec& u_nom, int* iters) {
    LocalSolve out;
    const double scale = 1.0 + u_nom.norm();
    Vec u = ascend_to_feasibility(models, start, u_nom, 200, iters);
    out.best_point = u;
    out.best_residual = min_value(models, u);
    if (out.best_residual < 0.0) return out;

    // Slide toward u_nom while staying feasible: straight segment steps first,
    // then moves tangent to the active constraint with Newton restoration.
    for (int it = 0; it < 400; ++it) {
        if (iters) ++(*iters);
        const Vec v = u_nom - u;
        if (v.norm() < 1e-13 * scale) break;
        double t = 1.0;
        bool moved = false;
        while (t > 1e-14) {
            if (min_value(models, u + t * v) >= 0.0) {
                u += t * v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (moved) {
            if (t == 1.0) break;  // reached u_nom
            continue;
        }

        int i = 0;
        min_value(models, u, &i);
        const Vec g = models[i].gradient(u);
        const double gn = g.norm();
        if (gn < 1e-14) break;
        const Vec gu = g / gn;
        Vec vt = v - v.dot(gu) * gu;
        if (vt.norm() <= 1e-10 * scale) break;  // stationary along the boundary
        bool accepted = false;
        for (double s = 1.0; s > 1e-10; s *= 0.5) {
            Vec ut = u + s * vt;
            for (int rs = 0; rs < 25; ++rs) {
                int j = 0;
                const double rr = min_value(models, ut, &j);
                if (rr >= 0.0) break;
                const Vec gj = models[j].gradient(ut);
                const double g2 = gj.squaredNorm();
                if (g2 < 1e-28) break;
                ut -= rr * gj / g2;
            }
            if (min_value(models, ut) >= 0.0 &&
                (ut - u_nom).norm() < (u - u_nom).norm() - 1e-14 * scale) {
                u = ut;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    // Polish onto the active boundary: a feasible point strictly inside wastes
    // distance, so walk the active constraint to zero along its gradient while
    // every other residual stays nonnegative.
    for (int ps = 0; ps < 5; ++ps) {
        int i = 0;
        const double r = min_value(models, u, &i);
        if (r <= 0.0) break;
        const Vec g = models[i].gradient(u);
        const double g2 = g.squaredNorm();
        if (g2 < 1e-28) break;
        const Vec cand = u - r * g / g2;
        if (min_value(models, cand) >= 0.0 && (cand - u_nom).norm() < (u - u_nom).norm())
            u = cand;
        else
            break;
    }
    out.best_feasible = u;
    out.best_residual = min_value(models, u);
    out.best_point = u;
    return out;
}

}  // namespace

FilterResult solve_nonconvex_multistart(const std::vector<ResidualModel>& models,
                                        const Vec& u_nom, const SolverOptions& opts) {
    const double r_nom = min_value(models, u_nom);
    if (r_nom >= 0.0) return nominal_result(u_nom, r_nom);

    int iters = 0;
    Vec best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const Vec& start : multistart_points(u_nom, opts)) {
        LocalSolve ls = local_descent(models, start, u_nom, &iters);
        if (ls.best_feasible.size() == 0) continue;
        const double d = (ls.best_feasible - u_nom).norm();
        if (d < best_dist) {
            best_dist = d;
            best = ls.best_feasible;
        }
    }
    if (best.size() == 0) throw Infeasible("multistart found no feasible input");
    return finish(best, min_value(models, best), SolverStatus::multistart_best, iters, u_nom);
}

Vec maximize_residual(const std::vector<ResidualModel>& models, const Vec& u_nom,
                      const SolverOptions& opts) {
    // Interior maximizer is analytic for a single strictly concave quadratic.
    if (models.size() == 1 && models[0].quadratic) {
        const auto& q = *models[0].quadratic;
        Eigen::SelfAdjointEigenSolver<Mat> eig(q.q);
        if (eig.eigenvalues().maxCoeff() < -1e-12) {
            return Eigen::LDLT<Mat>(Mat(-2.0 * q.q)).solve(q.p);
        }
    }
    Vec best = u_nom;
    double best_val = min_value(models, u_nom);
    for (const Vec& start : multistart_points(u_nom, opts)) {
        const Vec u = ascend_to_feasibility(models, start, u_nom, 300, nullptr);
        const double v = min_value(models, u);
        if (v > best_val) {
            best_val = v;
            best = u;
        }
    }
    return best;
}

namespace {

FilterResult dispatch_single(const ResidualModel& model, const Vec& u_nom,
                             const SolverOptions& opts) {
    if (model.input_dim == 1 && model.quadratic)
        return solve_scalar_interval(*model.quadratic, u_nom[0], opts);
    if (model.certified_convex) return solve_convex_kkt(model, u_nom, opts);
    return solve_nonconvex_multistart({model}, u_nom, opts);
}

FilterResult apply_fallback(const std::vector<ResidualModel>& models, const Vec& u_nom,
                            const SolverOptions& opts, const Vec& x, const char* what) {
    if (opts.fallback == FallbackPolicy::error) {
        std::ostringstream os;
        os << what << " at state [" << x.transpose() << "]";
        throw Infeasible(os.str());
    }
    Vec u = maximize_residual(models, u_nom, opts);
    const double residual = min_value(models, u);
    return finish(std::move(u), residual, SolverStatus::infeasible_fallback, 0, u_nom);
}

}  // namespace

FilterResult filter_step(const ControlAffineSystem& sys, const CbfCondition& cond,
                         const QuadraticBarrier& bar, const Vec& x, const Vec& u_nom,
                         const SolverOptions& opts) {
    ResidualModel model = make_residual_model(cond, sys, bar, x);
    const double r_nom = model.value(u_nom);
    if (r_nom >= 0.0) return nominal_result(u_nom, r_nom);
    try {
        return dispatch_single(model, u_nom, opts);
    } catch (const Infeasible&) {
        return apply_fallback({model}, u_nom, opts, x, "no feasible input for condition");
    }
}

FilterResult filter_step_joint(const ControlAffineSystem& sys,
                               const std::vector<CbfCondition>& conds, const SafeSet& safe_set,
                               const Vec& x, const Vec& u_nom, const SolverOptions& opts) {
    if (conds.empty()) throw ContractViolation("filter_step_joint: no conditions");
    if (conds.size() == 1) {
        const auto& bar = safe_set.barriers().at(conds[0].barrier_index);
        return filter_step(sys, conds[0], bar, x, u_nom, opts);
    }
    std::vector<ResidualModel> models;
    models.reserve(conds.size());
    for (const auto& c : conds)
        models.push_back(make_residual_model(c, sys, safe_set.barriers().at(c.barrier_index), x));

    const double r_nom = min_value(models, u_nom);
    if (r_nom >= 0.0) return nominal_result(u_nom, r_nom);

    try {
        return solve_nonconvex_multistart(models, u_nom, opts);
    } catch (const Infeasible&) {
        // Cyclic projection: repeatedly project onto each violated constraint.
        Vec u = u_nom;
        bool ok = false;
        for (int pass = 0; pass < 10 && !ok; ++pass) {
            ok = true;
            for (const auto& model : models) {
                if (model.value(u) >= 0.0) continue;
                ok = false;
                try {
                    u = dispatch_single(model, u, opts).u_star;
                } catch (const Infeasible&) {
                    return apply_fallback(models, u_nom, opts, x,
                                          "no jointly feasible input for conditions");
                }
            }
        }
        if (ok && min_value(models, u) >= -opts.feasibility_tol)
            return finish(u, min_value(models, u), SolverStatus::multistart_best, 0, u_nom);
        return apply_fallback(models, u_nom, opts, x, "no jointly feasible input for conditions");
    }
}

}  // namespace stochcbf
