#include "cfmimo/ipm.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace cfmimo::ipm {

namespace {

// Auxiliary row of the augmented system for a quadratic rank-1 term with a
// wide direction: keeping it explicit avoids densifying the Hessian block.
struct WideRank1 {
    int constraint = 0;
    int rank1_index = 0;
};

}  // namespace

// Infeasible-start primal-dual interior point. Each Newton step solves the
// symmetric quasi-definite augmented system
//
//   [ Hn + dI     B^T            J^T        ] [dx ]   [ b1 ]
//   [ B        -1/(2 lam w) - r              ] [dt ] = [ 0  ]
//   [ J                      -S/Lam - r      ] [dl ]   [ b2 - b3/lam ]
//
// where Hn holds the narrow Hessian terms, B the wide rank-1 directions and
// J all constraint gradients. Slack updates are recovered as ds = b2 - J dx,
// so no step divides by a vanishing slack. Primal/dual regularization keeps
// the factorization stable; full KKT-space iterative refinement removes the
// perturbation it introduces.
Result solve(const ConvexSubproblem &prob, const std::vector<double> &x0, const Options &opts) {
    prob.check_convexity();
    const int n = prob.num_vars;
    const int m = static_cast<int>(prob.constraints.size());
    constexpr double kPrimalReg = 1e-8;
    constexpr double kDualReg = 1e-8;

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(prob.objective.data(), n);
    const double c_norm = 1.0 + c.lpNorm<Eigen::Infinity>();

    // Variables appearing in log terms must stay strictly positive.
    std::vector<std::uint8_t> log_var(n, 0);
    for (const auto &con : prob.constraints)
        for (auto &[j, w] : con.neg_log) log_var[j] = 1;
    for (int j = 0; j < n; ++j)
        if (log_var[j] && x[j] <= 0.0) x[j] = 1e-3;

    std::vector<std::vector<int>> supports(m);
    std::vector<std::vector<double>> grad_vals(m);
    std::vector<WideRank1> wide_r1;
    for (int i = 0; i < m; ++i) {
        supports[i] = prob.constraints[i].support();
        grad_vals[i].resize(supports[i].size());
        const auto &r1 = prob.constraints[i].quad_rank1;
        for (size_t r = 0; r < r1.size(); ++r) {
            if (r1[r].dir.entries.size() > 2) wide_r1.push_back({i, static_cast<int>(r)});
        }
    }
    const int pr = static_cast<int>(wide_r1.size());
    const int dim = n + pr + m;

    Eigen::VectorXd g(m), s(m), lam(m);
    for (int i = 0; i < m; ++i) {
        g[i] = prob.constraints[i].eval(x.data());
        s[i] = std::max(-g[i], 0.01 * (1.0 + std::fabs(g[i])));
        lam[i] = std::clamp(1.0 / s[i], 1e-3, 1e3);
    }

    Eigen::SparseMatrix<double> A(dim, dim);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd scratch = Eigen::VectorXd::Zero(n);

    Result res;
    res.message = "max iterations reached";
    int stall = 0;
    const char *trace_env = std::getenv("CFMIMO_IPM_TRACE");
    const int trace = trace_env ? std::atoi(trace_env) : 0;

    Eigen::VectorXd best_x = x, best_s = s, best_lam = lam;
    double best_score = std::numeric_limits<double>::infinity();
    int best_iter = 0;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        bool finite = true;
        for (int i = 0; i < m; ++i) {
            g[i] = prob.constraints[i].eval(x.data());
            finite = finite && std::isfinite(g[i]);
        }
        if (!finite) {
            res.message = "constraint evaluation became non-finite";
            break;
        }
        if (lam.lpNorm<Eigen::Infinity>() > 1e12 || s.lpNorm<Eigen::Infinity>() > 1e14) {
            res.message = "dual variables diverged (subproblem may be infeasible)";
            break;
        }

        // Gradients and residuals; the scratch buffer stays zeroed outside
        // each constraint's support.
        Eigen::VectorXd r_d = c;
        for (int i = 0; i < m; ++i) {
            auto &vals = grad_vals[i];
            prob.constraints[i].add_gradient(x.data(), 1.0, scratch.data());
            for (size_t t = 0; t < supports[i].size(); ++t) {
                vals[t] = scratch[supports[i][t]];
                scratch[supports[i][t]] = 0.0;
                r_d[supports[i][t]] += lam[i] * vals[t];
            }
        }
        Eigen::VectorXd r_p = g + s;

        double mu = s.dot(lam) / m;
        // Objective scale includes the constant: the linearized integrality
        // penalty cancels a large constant against c.x.
        double obj = c.dot(x) + prob.objective_constant;
        res.dual_residual = r_d.lpNorm<Eigen::Infinity>() / c_norm;
        res.primal_residual = r_p.lpNorm<Eigen::Infinity>() / (1.0 + x.lpNorm<Eigen::Infinity>());
        res.complementarity = s.dot(lam) / (1.0 + std::fabs(obj));
        res.iterations = iter;
        if (trace) {
            std::fprintf(stderr, "ipm %3d: obj %.8e rd %.3e rp %.3e mu %.3e\n", iter, obj,
                         res.dual_residual, res.primal_residual, mu);
        }
        // Dual degeneracy at vertex solutions slows the dual residual tail;
        // weight it lower in the progress score.
        double score = std::max({0.1 * res.dual_residual, res.primal_residual, res.complementarity});
        if (score < 0.9 * best_score) {
            best_iter = iter;
        }
        if (score < best_score) {
            best_score = score;
            best_x = x;
            best_s = s;
            best_lam = lam;
        }
        if (res.dual_residual <= 100.0 * opts.tol && res.primal_residual <= opts.tol &&
            res.complementarity <= opts.tol) {
            res.converged = true;
            res.message = "converged";
            break;
        }
        if (best_score <= 100.0 * opts.tol && score > 100.0 * best_score) {
            res.message = "stopped on endgame oscillation";
            break;
        }
        if (iter - best_iter > 20 && best_score <= 1e3 * opts.tol) {
            res.message = "stopped on progress plateau";
            break;
        }

        // Assemble the augmented matrix.
        trips.clear();
        for (int j = 0; j < n; ++j) trips.emplace_back(j, j, kPrimalReg);
        for (int i = 0; i < m; ++i) {
            const auto &con = prob.constraints[i];
            for (auto &[j, d] : con.quad_diag) trips.emplace_back(j, j, lam[i] * 2.0 * d);
            for (auto &[j, w] : con.neg_log) trips.emplace_back(j, j, lam[i] * w / (x[j] * x[j]));
            for (const auto &r1 : con.quad_rank1) {
                if (r1.dir.entries.size() > 2) continue;
                const auto &e = r1.dir.entries;
                for (size_t a = 0; a < e.size(); ++a)
                    for (size_t b = a; b < e.size(); ++b) {
                        double v = lam[i] * 2.0 * r1.weight * e[a].second * e[b].second;
                        trips.emplace_back(e[a].first, e[b].first, v);
                        if (e[a].first != e[b].first) trips.emplace_back(e[b].first, e[a].first, v);
                    }
            }
        }
        for (int r = 0; r < pr; ++r) {
            const auto &term = prob.constraints[wide_r1[r].constraint].quad_rank1[wide_r1[r].rank1_index];
            const int row = n + r;
            for (auto &[j, u] : term.dir.entries) {
                trips.emplace_back(row, j, u);
                trips.emplace_back(j, row, u);
            }
            double w2 = 2.0 * lam[wide_r1[r].constraint] * term.weight;
            trips.emplace_back(row, row, -1.0 / std::max(w2, 1e-300) - kDualReg);
        }
        for (int i = 0; i < m; ++i) {
            const int row = n + pr + i;
            const auto &sup = supports[i];
            const auto &vals = grad_vals[i];
            for (size_t t = 0; t < sup.size(); ++t) {
                trips.emplace_back(row, sup[t], vals[t]);
                trips.emplace_back(sup[t], row, vals[t]);
            }
            trips.emplace_back(row, row, -s[i] / lam[i] - kDualReg);
        }
        A.setFromTriplets(trips.begin(), trips.end());
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success) {
            res.message = "augmented factorization failed";
            break;
        }

        auto apply_hessian = [&](const Eigen::VectorXd &v) -> Eigen::VectorXd {
            Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
            for (int i = 0; i < m; ++i) {
                const auto &con = prob.constraints[i];
                for (auto &[j, d] : con.quad_diag) out[j] += lam[i] * 2.0 * d * v[j];
                for (auto &r1 : con.quad_rank1) {
                    double t = lam[i] * 2.0 * r1.weight * r1.dir.dot(v.data());
                    for (auto &[j, u] : r1.dir.entries) out[j] += t * u;
                }
                for (auto &[j, w] : con.neg_log) out[j] += lam[i] * w / (x[j] * x[j]) * v[j];
            }
            return out;
        };

        auto jac_dot = [&](int i, const Eigen::VectorXd &v) {
            double acc = 0.0;
            const auto &sup = supports[i];
            const auto &vals = grad_vals[i];
            for (size_t t = 0; t < sup.size(); ++t) acc += vals[t] * v[sup[t]];
            return acc;
        };

        // Solves H dx + J^T dl = b1; J dx + ds = b2; Lam ds + S dl = b3, with
        // two rounds of refinement against the exact KKT rows.
        Eigen::VectorXd rhs(dim), sol(dim), e1(n), e2(m), e3(m);
        auto augmented = [&](const Eigen::VectorXd &b1, const Eigen::VectorXd &b2,
                             const Eigen::VectorXd &b3, Eigen::VectorXd &ox, Eigen::VectorXd &os,
                             Eigen::VectorXd &ol) {
            rhs.setZero();
            rhs.head(n) = b1;
            for (int i = 0; i < m; ++i) rhs[n + pr + i] = b2[i] - b3[i] / lam[i];
            sol = ldlt.solve(rhs);
            ox = sol.head(n);
            ol = sol.tail(m);
            for (int i = 0; i < m; ++i) os[i] = b2[i] - jac_dot(i, ox);
        };
        auto solve_kkt = [&](const Eigen::VectorXd &b1, const Eigen::VectorXd &b2,
                             const Eigen::VectorXd &b3, Eigen::VectorXd &dx, Eigen::VectorXd &ds,
                             Eigen::VectorXd &dl) {
            augmented(b1, b2, b3, dx, ds, dl);
            Eigen::VectorXd cx(n), cs(m), cl(m);
            for (int round = 0; round < 2; ++round) {
                e1 = b1 - apply_hessian(dx);
                for (int i = 0; i < m; ++i) {
                    const auto &sup = supports[i];
                    const auto &vals = grad_vals[i];
                    for (size_t t = 0; t < sup.size(); ++t) e1[sup[t]] -= dl[i] * vals[t];
                    e2[i] = b2[i] - (jac_dot(i, dx) + ds[i]);
                    e3[i] = b3[i] - (lam[i] * ds[i] + s[i] * dl[i]);
                }
                if (trace >= 2) {
                    std::fprintf(stderr, "    kkt %d: e1 %.3e e2 %.3e e3 %.3e dl %.3e\n", round,
                                 e1.lpNorm<Eigen::Infinity>(), e2.lpNorm<Eigen::Infinity>(),
                                 e3.lpNorm<Eigen::Infinity>(), dl.lpNorm<Eigen::Infinity>());
                }
                augmented(e1, e2, e3, cx, cs, cl);
                dx += cx;
                ds += cs;
                dl += cl;
            }
        };

        auto max_step = [&](const Eigen::VectorXd &v, const Eigen::VectorXd &dv) {
            double a = 1.0;
            for (int i = 0; i < v.size(); ++i)
                if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
            return a;
        };

        // Predictor.
        Eigen::VectorXd b3 = -(lam.array() * s.array()).matrix();
        Eigen::VectorXd dx_aff(n), ds_aff(m), dl_aff(m);
        solve_kkt(-r_d, -r_p, b3, dx_aff, ds_aff, dl_aff);
        double ap_aff = max_step(s, ds_aff);
        double ad_aff = max_step(lam, dl_aff);
        double mu_aff = (s + ap_aff * ds_aff).dot(lam + ad_aff * dl_aff) / m;
        double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 1e-4, 0.9);

        // Corrector.
        for (int i = 0; i < m; ++i) b3[i] = -(lam[i] * s[i] - sigma * mu + ds_aff[i] * dl_aff[i]);
        Eigen::VectorXd dx(n), ds(m), dl(m);
        solve_kkt(-r_d, -r_p, b3, dx, ds, dl);

        if (!dx.allFinite() || !ds.allFinite() || !dl.allFinite()) {
            res.message = "search direction became non-finite";
            break;
        }

        // Slacks and multipliers that have effectively converged to zero must
        // not throttle the ratio test: freeze them at their floor instead.
        auto freeze_floors = [&](Eigen::VectorXd &dsv, Eigen::VectorXd &dlv) {
            for (int i = 0; i < m; ++i) {
                if (dsv[i] < 0.0 && s[i] <= 1e-13 * (1.0 + std::fabs(g[i]))) dsv[i] = 0.0;
                if (dlv[i] < 0.0 && lam[i] <= 1e-13) dlv[i] = 0.0;
            }
        };
        freeze_floors(ds, dl);

        auto step_bounds = [&](const Eigen::VectorXd &dxv, const Eigen::VectorXd &dsv,
                               const Eigen::VectorXd &dlv) {
            double apb = std::min(1.0, opts.boundary_frac * max_step(s, dsv));
            double adb = std::min(1.0, opts.boundary_frac * max_step(lam, dlv));
            for (int j = 0; j < n; ++j) {
                if (log_var[j] && dxv[j] < 0.0) apb = std::min(apb, -0.99 * x[j] / dxv[j]);
            }
            return std::pair{apb, adb};
        };
        auto [ap0, ad0] = step_bounds(dx, ds, dl);

        // Centrality correctors: push badly unbalanced complementarity pairs
        // toward the target neighborhood, keeping the direction only when it
        // lengthens the step. Reuses the factorization.
        for (int round = 0; round < 2; ++round) {
            if (ap0 > 0.6 && ad0 > 0.6) break;
            Eigen::VectorXd b3c = Eigen::VectorXd::Zero(m);
            bool any = false;
            for (int i = 0; i < m; ++i) {
                double v = (s[i] + ap0 * ds[i]) * (lam[i] + ad0 * dl[i]);
                double lo = 0.1 * sigma * mu, hi = 10.0 * sigma * mu;
                if (v < lo) {
                    b3c[i] = lo - v;
                    any = true;
                } else if (v > hi) {
                    b3c[i] = hi - v;
                    any = true;
                }
            }
            if (!any) break;
            Eigen::VectorXd gx(n), gs(m), gl(m);
            solve_kkt(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m), b3c, gx, gs, gl);
            Eigen::VectorXd dx2 = dx + gx, ds2 = ds + gs, dl2 = dl + gl;
            freeze_floors(ds2, dl2);
            auto [ap2, ad2] = step_bounds(dx2, ds2, dl2);
            if (ap2 + ad2 <= ap0 + ad0 + 0.01) break;
            dx = std::move(dx2);
            ds = std::move(ds2);
            dl = std::move(dl2);
            ap0 = ap2;
            ad0 = ad2;
        }

        // The constraints bend away from the Newton linearization; back off
        // whenever the trial point inflates the KKT residual.
        const double rd_now = r_d.lpNorm<Eigen::Infinity>();
        const double rp_now = r_p.lpNorm<Eigen::Infinity>();
        const double budget = std::max({2.0 * std::max(rd_now, rp_now), 1e2 * mu, 1e-12});
        double frac = 1.0;
        Eigen::VectorXd x_try(n), rd_try(n);
        for (int bt = 0; bt < 12; ++bt) {
            x_try = x + frac * ap0 * dx;
            bool ok = true;
            double rp_try = 0.0;
            rd_try = c;
            for (int i = 0; i < m && ok; ++i) {
                double gi = prob.constraints[i].eval(x_try.data());
                if (!std::isfinite(gi)) {
                    ok = false;
                    break;
                }
                rp_try = std::max(rp_try, std::fabs(gi + s[i] + frac * ap0 * ds[i]));
                prob.constraints[i].add_gradient(x_try.data(), lam[i] + frac * ad0 * dl[i],
                                                 rd_try.data());
            }
            if (ok && std::max(rp_try, rd_try.lpNorm<Eigen::Infinity>()) <= budget) break;
            frac *= 0.5;
        }
        const double ap = frac * ap0;
        const double ad = frac * ad0;

        if (trace >= 2) {
            std::fprintf(stderr, "    step: ap0 %.3e ad0 %.3e frac %.3e sigma %.3e mu_aff %.3e\n",
                         ap0, ad0, frac, sigma, mu_aff);
            if (trace >= 3) {
                int arg = -1;
                double amin = 2.0;
                for (int i = 0; i < m; ++i)
                    if (ds[i] < 0.0 && -s[i] / ds[i] < amin) {
                        amin = -s[i] / ds[i];
                        arg = i;
                    }
                if (arg >= 0)
                    std::fprintf(stderr, "    limiter %s: s %.3e lam %.3e ds %.3e dl %.3e g %.3e\n",
                                 prob.constraints[arg].name.c_str(), s[arg], lam[arg], ds[arg],
                                 dl[arg], g[arg]);
            }
        }
        if (std::max(ap, ad) < 1e-11) {
            if (++stall >= 2) {
                res.message = "step size collapsed";
                break;
            }
        } else {
            stall = 0;
        }

        x += ap * dx;
        s += ap * ds;
        lam += ad * dl;
        for (int i = 0; i < m; ++i) s[i] = std::max(s[i], 1e-300);
    }

    // Report the best iterate seen; recompute its residuals for the caller.
    x = best_x;
    s = best_s;
    lam = best_lam;
    {
        Eigen::VectorXd r_d = c;
        for (int i = 0; i < m; ++i) {
            g[i] = prob.constraints[i].eval(x.data());
            prob.constraints[i].add_gradient(x.data(), lam[i], r_d.data());
        }
        double obj = c.dot(x) + prob.objective_constant;
        res.dual_residual = r_d.lpNorm<Eigen::Infinity>() / c_norm;
        res.primal_residual = (g + s).lpNorm<Eigen::Infinity>() / (1.0 + x.lpNorm<Eigen::Infinity>());
        res.complementarity = s.dot(lam) / (1.0 + std::fabs(obj));
        if (!res.converged && res.dual_residual <= 100.0 * opts.tol &&
            res.primal_residual <= opts.tol && res.complementarity <= opts.tol) {
            res.converged = true;
            res.message = "converged";
        }
    }
    res.x.assign(x.data(), x.data() + n);
    res.lambda.assign(lam.data(), lam.data() + m);
    res.slack.assign(s.data(), s.data() + m);
    return res;
}

}  // namespace cfmimo::ipm
