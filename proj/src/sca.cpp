#include "cfmimo/sca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfmimo/apg.hpp"
#include "cfmimo/baselines.hpp"
#include "cfmimo/se_model.hpp"

namespace cfmimo {

namespace {
constexpr double kLog2E = 1.4426950408889634;
}

double surrogate_se_lower(double u, double w, double u0, double w0, double prelog) {
    const double c = prelog * kLog2E;
    const double u0sq = u0 * u0;
    return c * (std::log1p(u0sq / w0) - u0sq / w0 + 2.0 * u0 * u / w0 -
                u0sq * (u * u + w) / (w0 * (u0sq + w0)));
}

double surrogate_se_upper(double u, double w, double u0, double w0, double prelog) {
    const double c = prelog * kLog2E;
    const double a = u0 * u0 + w0;
    return c * (std::log(a) + (u * u + w) / a - 1.0 - std::log(w));
}

namespace {

double amplitude_for_ue(const Mat &theta, const kernels::SeWorkspace &ws, int k) {
    double u = 0.0;
    for (int m = 0; m < ws.M; ++m) u += ws.sig(m, k) * theta(m, k);
    return u;
}

}  // namespace

double surrogate_se_lower(const Mat &theta, double w_hat, double u0, double w0,
                          const Realization &r, const NetworkConfig &cfg, int k) {
    auto ws = kernels::make_workspace(r, cfg);
    return surrogate_se_lower(amplitude_for_ue(theta, ws, k), w_hat, u0, w0, cfg.prelog());
}

double surrogate_se_upper(const Mat &theta, double w_hat, double u0, double w0,
                          const Realization &r, const NetworkConfig &cfg, int k) {
    auto ws = kernels::make_workspace(r, cfg);
    return surrogate_se_upper(amplitude_for_ue(theta, ws, k), w_hat, u0, w0, cfg.prelog());
}

BuiltSubproblem convexified_constraints(const ScaIterate &it, const Realization &r,
                                        const NetworkConfig &cfg) {
    const int M = r.num_aps();
    const int K = r.num_ues();
    auto ws = kernels::make_workspace(r, cfg);
    const double prelog_c = cfg.prelog() * kLog2E;
    const double rho_d = cfg.dl_power;

    BuiltSubproblem bp;
    bp.layout = {M, K};
    const ScaLayout &L = bp.layout;
    ConvexSubproblem &p = bp.prob;
    p.num_vars = L.num_vars();
    p.objective.assign(p.num_vars, 0.0);

    // Expansion constants: signal amplitude and interference of the iterate.
    bp.u0 = kernels::signal_amplitude(it.theta, ws);
    bp.w0 = kernels::interference(kernels::row_power(it.theta), ws);
    bp.w_scale.assign(K, 1.0);
    for (int k = 0; k < K; ++k) bp.w_scale[k] = std::max(1.0, bp.w0[k]);

    // Objective: -sum t + lambda * (linearized integrality penalty).
    for (int k = 0; k < K; ++k) p.objective[L.t(k)] = -1.0;
    double q_const = 0.0;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
            p.objective[L.a(m, k)] = it.lambda * (1.0 - 2.0 * it.a(m, k));
            q_const += it.a(m, k) * it.a(m, k);
        }
    p.objective_constant = it.lambda * q_const;

    auto add = [&](ConvexConstraint &&c) { p.constraints.push_back(std::move(c)); };

    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            {
                ConvexConstraint c;
                c.name = "theta_nonneg";
                c.lin.add(L.theta(m, k), -1.0);
                add(std::move(c));
            }
            {
                ConvexConstraint c;
                c.name = "a_lower";
                c.lin.add(L.a(m, k), -1.0);
                add(std::move(c));
            }
            {
                ConvexConstraint c;
                c.name = "a_upper";
                c.constant = -1.0;
                c.lin.add(L.a(m, k), 1.0);
                add(std::move(c));
            }
            {
                ConvexConstraint c;
                c.name = "power_assoc_coupling";
                c.quad_diag.emplace_back(L.theta(m, k), 1.0);
                c.lin.add(L.a(m, k), -1.0);
                add(std::move(c));
            }
        }
        {
            ConvexConstraint c;
            c.name = "ap_power";
            c.constant = -1.0;
            for (int k = 0; k < K; ++k) c.quad_diag.emplace_back(L.theta(m, k), 1.0);
            add(std::move(c));
        }
        {
            ConvexConstraint c;
            c.name = "serving_cap";
            c.constant = -static_cast<double>(cfg.max_served);
            for (int k = 0; k < K; ++k) c.lin.add(L.a(m, k), 1.0);
            add(std::move(c));
        }
        {
            // Bilinear fronthaul load majorized around (a0, t_hat0):
            // sum_k [((a+t)^2 - 2(a0-t0)(a-t) + (a0-t0)^2) / 4] <= cap.
            ConvexConstraint c;
            c.name = "fronthaul";
            double cst = -cfg.fronthaul_cap;
            for (int k = 0; k < K; ++k) {
                double d0 = it.a(m, k) - it.t_hat[k];
                ConvexConstraint::Rank1 r1;
                r1.weight = 0.25;
                r1.dir.add(L.a(m, k), 1.0);
                r1.dir.add(L.t_hat(k), 1.0);
                c.quad_rank1.push_back(std::move(r1));
                c.lin.add(L.a(m, k), -0.5 * d0);
                c.lin.add(L.t_hat(k), 0.5 * d0);
                cst += 0.25 * d0 * d0;
            }
            c.constant = cst;
            add(std::move(c));
        }
    }

    for (int k = 0; k < K; ++k) {
        {
            ConvexConstraint c;
            c.name = "coverage";
            c.constant = 1.0;
            for (int m = 0; m < M; ++m) c.lin.add(L.a(m, k), -1.0);
            add(std::move(c));
        }
        {
            ConvexConstraint c;
            c.name = "qos_floor";
            c.constant = cfg.qos_se;
            c.lin.add(L.t(k), -1.0);
            add(std::move(c));
        }
        {
            ConvexConstraint c;
            c.name = "w_floor";
            c.constant = 1.0;
            c.lin.add(L.w_hat(k), -bp.w_scale[k]);
            add(std::move(c));
        }

        const double u0 = bp.u0[k];
        const double w0 = bp.w0[k];
        const double u0sq = u0 * u0;

        {
            // t_k <= concave minorant of the true SE: the interference enters
            // through its exact quadratic dependence on theta.
            ConvexConstraint c;
            c.name = "se_lower_bound";
            const double c0 = prelog_c * (std::log1p(u0sq / w0) - u0sq / w0);
            const double c1 = prelog_c * 2.0 * u0 / w0;
            const double c2 = prelog_c * u0sq / (w0 * (u0sq + w0));
            c.constant = -c0 + c2;  // + c2 * noise floor of the interference
            c.lin.add(L.t(k), 1.0);
            for (int m = 0; m < M; ++m) {
                if (ws.sig(m, k) != 0.0) c.lin.add(L.theta(m, k), -c1 * ws.sig(m, k));
            }
            if (c2 > 0.0) {
                ConvexConstraint::Rank1 r1;
                r1.weight = c2;
                for (int m = 0; m < M; ++m)
                    if (ws.sig(m, k) != 0.0) r1.dir.add(L.theta(m, k), ws.sig(m, k));
                c.quad_rank1.push_back(std::move(r1));
                for (int m = 0; m < M; ++m) {
                    double d = c2 * rho_d * ws.nu(m, k);
                    for (int l = 0; l < K; ++l) c.quad_diag.emplace_back(L.theta(m, l), d);
                }
            }
            add(std::move(c));
        }
        {
            // Convex majorant of the slack-form SE, bounded by t_hat.
            ConvexConstraint c;
            c.name = "se_upper_bound";
            const double a0 = u0sq + w0;
            const double cq = prelog_c / a0;
            c.constant = prelog_c * (std::log(a0) - 1.0) - prelog_c * std::log(bp.w_scale[k]);
            c.lin.add(L.t_hat(k), -1.0);
            c.lin.add(L.w_hat(k), cq * bp.w_scale[k]);
            c.neg_log.emplace_back(L.w_hat(k), prelog_c);
            ConvexConstraint::Rank1 r1;
            r1.weight = cq;
            for (int m = 0; m < M; ++m)
                if (ws.sig(m, k) != 0.0) r1.dir.add(L.theta(m, k), ws.sig(m, k));
            c.quad_rank1.push_back(std::move(r1));
            add(std::move(c));
        }
        {
            // w_hat below the linearized interference (tangent from below of
            // the convex quadratic, so w_hat <= V holds on the whole set).
            ConvexConstraint c;
            c.name = "w_ceiling";
            double cst = -1.0;
            c.lin.add(L.w_hat(k), bp.w_scale[k]);
            for (int m = 0; m < M; ++m) {
                double numk = rho_d * ws.nu(m, k);
                for (int l = 0; l < K; ++l) {
                    double th0 = it.theta(m, l);
                    if (th0 != 0.0) c.lin.add(L.theta(m, l), -2.0 * numk * th0);
                    cst += numk * th0 * th0;
                }
            }
            c.constant = cst;
            add(std::move(c));
        }
    }

    // Sort linear entries by index (rank-1 dirs are already ordered).
    for (auto &c : p.constraints) {
        std::sort(c.lin.entries.begin(), c.lin.entries.end());
        std::sort(c.quad_diag.begin(), c.quad_diag.end());
    }

    // Start point: the expansion point itself in scaled coordinates, with the
    // association nudged off its bounds.
    bp.x0.assign(p.num_vars, 0.0);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
            bp.x0[L.theta(m, k)] = it.theta(m, k);
            bp.x0[L.a(m, k)] = 0.02 + 0.96 * std::clamp(it.a(m, k), 0.0, 1.0);
        }
    for (int k = 0; k < K; ++k) {
        bp.x0[L.t(k)] = std::max(it.t[k], cfg.qos_se + 1e-6);
        bp.x0[L.t_hat(k)] = it.t_hat[k];
        bp.x0[L.w_hat(k)] = it.w_hat[k] / bp.w_scale[k];
    }

    // Row scaling keeps gradient norms near unity for the inner solver.
    std::vector<double> grad(p.num_vars, 0.0);
    for (auto &c : p.constraints) {
        auto sup = c.support();
        for (int j : sup) grad[j] = 0.0;
        c.add_gradient(bp.x0.data(), 1.0, grad.data());
        double norm = 0.0;
        for (int j : sup) {
            norm = std::max(norm, std::fabs(grad[j]));
            grad[j] = 0.0;
        }
        if (norm > 1.0) {
            double inv = 1.0 / norm;
            c.constant *= inv;
            for (auto &[i, v] : c.lin.entries) v *= inv;
            for (auto &[i, v] : c.quad_diag) v *= inv;
            for (auto &r1 : c.quad_rank1) r1.weight *= inv;
            for (auto &[i, v] : c.neg_log) v *= inv;
        }
    }
    return bp;
}

SubproblemSolution solve_subproblem(const BuiltSubproblem &bp, double tol) {
    ipm::Options opts;
    opts.tol = tol;
    ipm::Result r = ipm::solve(bp.prob, bp.x0, opts);
    // Dual multipliers at degenerate vertices settle far more slowly than the
    // point itself; the hard gate weights feasibility and the gap, and only
    // genuine failures (divergence, heavy infeasibility) are thrown.
    double worst = std::max({0.01 * r.dual_residual, r.primal_residual, r.complementarity});
    if (!r.converged && worst > 10000.0 * tol) {
        std::string worst_name = "?";
        double worst_g = -1e300;
        for (size_t i = 0; i < bp.prob.constraints.size(); ++i) {
            double gi = bp.prob.constraints[i].eval(r.x.data());
            if (gi > worst_g) {
                worst_g = gi;
                worst_name = bp.prob.constraints[i].name;
            }
        }
        throw std::runtime_error("solve_subproblem: inner solver stopped with residual " +
                                 std::to_string(worst) + " (" + r.message +
                                 "), most violated constraint: " + worst_name);
    }

    SubproblemSolution sol;
    sol.ipm = std::move(r);
    sol.x = sol.ipm.x;
    const ScaLayout &L = bp.layout;
    for (int k = 0; k < L.K; ++k) sol.x[L.w_hat(k)] *= bp.w_scale[k];
    sol.objective = bp.prob.objective_value(sol.ipm.x.data());
    return sol;
}

ScaIterate make_sca_init(const Realization &r, const NetworkConfig &cfg, double lambda) {
    const int M = r.num_aps();
    const int K = r.num_ues();
    auto ws = kernels::make_workspace(r, cfg);

    AssocVars heu = heu_associate(r, cfg);
    ScaIterate it;
    it.lambda = lambda;
    it.a = Mat(M, K, 0.0);
    it.theta = Mat(M, K, 0.0);
    // A binary association start would freeze the linearized integrality
    // penalty at its vertex on the first iteration, and any per-link bias in
    // the start tilts it the same way. A uniform interior association keeps
    // the first subproblem neutral: the association emerges from the SE
    // objective and is locked in progressively by the relinearized penalty.
    const double a_uniform = std::min(0.9, 0.9 * cfg.max_served / K);
    const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.max_served));
    for (size_t i = 0; i < it.a.size(); ++i) {
        it.a.data[i] = a_uniform;
        if (heu.a.data[i] > 0.5) {
            it.theta.data[i] = std::min(amp, std::sqrt(0.9 * a_uniform));
        }
    }

    auto se_of = [&](const Mat &th) { return kernels::spectral_efficiency(th, ws); };
    auto loads_of = [&](const std::vector<double> &se) {
        std::vector<double> loads(M, 0.0);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) loads[m] += it.a(m, k) * se[k];
        return loads;
    };

    // Scale power down until the initial fronthaul loads fit under the cap.
    auto se = se_of(it.theta);
    for (int round = 0; round < 200; ++round) {
        auto loads = loads_of(se);
        double worst = *std::max_element(loads.begin(), loads.end());
        if (worst <= 0.98 * cfg.fronthaul_cap) break;
        for (double &v : it.theta.data) v *= 0.97;
        se = se_of(it.theta);
    }

    // Greedy power bumps for UEs below the QoS floor: grow the strongest
    // associated link first, recruit an extra AP when every associated link
    // is already at full power.
    for (int round = 0; round < 100; ++round) {
        int worst_k = -1;
        double worst_gap = 1e-9;
        for (int k = 0; k < K; ++k) {
            double gap = cfg.qos_se - se[k];
            if (gap > worst_gap) {
                worst_gap = gap;
                worst_k = k;
            }
        }
        if (worst_k < 0) break;

        int best_m = -1;
        double best_room = 0.0;
        for (int m = 0; m < M; ++m) {
            if (it.a(m, worst_k) < 0.5) continue;
            double cur = it.theta(m, worst_k) * it.theta(m, worst_k);
            double room = (1.0 - cur) * r.beta(m, worst_k);
            if (cur < 1.0 - 1e-9 && room > best_room) {
                best_room = room;
                best_m = m;
            }
        }
        if (best_m < 0) {
            // Associated links saturated: add the strongest AP with serving
            // capacity left.
            int add_m = -1;
            for (int m = 0; m < M; ++m) {
                if (it.a(m, worst_k) > 0.5) continue;
                double row = 0.0;
                for (int k = 0; k < K; ++k) row += it.a(m, k);
                if (row >= cfg.max_served - 1e-9) continue;
                if (add_m < 0 || r.beta(m, worst_k) > r.beta(add_m, worst_k)) add_m = m;
            }
            if (add_m < 0) break;  // instance may be QoS-infeasible; the solver reports it
            it.a(add_m, worst_k) = std::max(it.a(add_m, worst_k), 0.9);
            best_m = add_m;
        }
        double cur_sq = it.theta(best_m, worst_k) * it.theta(best_m, worst_k);
        double row_power = 0.0;
        for (int k = 0; k < K; ++k) row_power += it.theta(best_m, k) * it.theta(best_m, k);
        double target_sq =
            std::min(0.9 * it.a(best_m, worst_k), std::max(2.0 * cur_sq, cur_sq + 0.05));
        double other = row_power - cur_sq;
        if (other + target_sq > 1.0 && other > 0.0) {
            // Free budget by shrinking the other links of this AP.
            double shrink = std::sqrt(std::max(0.0, (1.0 - target_sq) / other));
            for (int k = 0; k < K; ++k)
                if (k != worst_k) it.theta(best_m, k) *= shrink;
        }
        it.theta(best_m, worst_k) = std::sqrt(target_sq);
        se = se_of(it.theta);
    }

    it.t = se;
    for (int k = 0; k < K; ++k) it.t[k] = std::max(se[k], cfg.qos_se);
    it.t_hat = se;
    it.w_hat = kernels::interference(kernels::row_power(it.theta), ws);
    return it;
}

ScaResult sca_solve(const Realization &r, const NetworkConfig &cfg, const ScaParams &params,
                    std::optional<ScaIterate> init) {
    auto t0 = std::chrono::steady_clock::now();
    const int M = r.num_aps();
    const int K = r.num_ues();

    ScaIterate it = init.has_value() ? std::move(*init) : make_sca_init(r, cfg, params.lambda);
    it.lambda = params.lambda;

    ScaResult res;
    bool objective_converged = false;
    std::string solver_failure;
    double prev_obj = 0.0;
    for (int n = 0; n < params.max_iters; ++n) {
        BuiltSubproblem bp = convexified_constraints(it, r, cfg);
        SubproblemSolution sol;
        try {
            sol = solve_subproblem(bp, params.subproblem_tol);
        } catch (const std::exception &e) {
            // Keep the last feasible iterate; QoS-infeasible draws land here.
            solver_failure = e.what();
            break;
        }

        const ScaLayout &L = bp.layout;
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) {
                it.theta(m, k) = std::max(0.0, sol.x[L.theta(m, k)]);
                it.a(m, k) = std::clamp(sol.x[L.a(m, k)], 0.0, 1.0);
            }
        for (int k = 0; k < K; ++k) {
            it.t[k] = sol.x[L.t(k)];
            it.t_hat[k] = sol.x[L.t_hat(k)];
            it.w_hat[k] = sol.x[L.w_hat(k)];
        }
        it.iter = n + 1;
        it.objective = sol.objective;
        res.outcome.objective_trace.push_back(sol.objective);

        if (n > 0 && std::fabs(sol.objective - prev_obj) <= params.tol * std::max(1.0, std::fabs(sol.objective))) {
            objective_converged = true;
            prev_obj = sol.objective;
            break;
        }
        prev_obj = sol.objective;
    }

    // Integrality check of the relaxed association.
    double q_norm = 0.0;
    double worst_int = 0.0;
    for (double v : it.a.data) {
        q_norm += v - v * v;
        worst_int = std::max(worst_int, std::min(v, 1.0 - v));
    }
    q_norm /= static_cast<double>(M) * K;

    res.assoc = Mat(M, K, 0.0);
    res.theta = it.theta;
    for (size_t i = 0; i < it.a.size(); ++i) res.assoc.data[i] = it.a.data[i] >= 0.5 ? 1.0 : 0.0;
    for (size_t i = 0; i < res.theta.size(); ++i)
        if (res.assoc.data[i] < 0.5) res.theta.data[i] = 0.0;
    for (int m = 0; m < M; ++m) {
        std::span<double> row(&res.theta.data[static_cast<size_t>(m) * K], K);
        project_theta_row(row);
    }

    PowerAlloc pa{res.theta};
    AssocVars av{res.assoc, false};
    res.outcome.se_per_ue = se_per_ue(pa, r, cfg);
    res.outcome.sum_se = std::accumulate(res.outcome.se_per_ue.begin(), res.outcome.se_per_ue.end(), 0.0);
    res.outcome.fronthaul_per_ap = fronthaul_load(av, res.outcome.se_per_ue);
    res.outcome.feasibility = check_feasibility(pa, av, r, cfg);
    res.outcome.iterations = it.iter;
    res.outcome.converged = objective_converged && solver_failure.empty();
    if (!solver_failure.empty()) {
        res.outcome.diagnostics = solver_failure;
    } else if (q_norm > params.integrality_norm) {
        res.outcome.diagnostics = "normalized integrality residual " + std::to_string(q_norm) +
                                  " above threshold (penalty weight too small for this instance)";
    } else if (!objective_converged) {
        res.outcome.diagnostics = "surrogate objective still moving at max_iters";
    }
    if (worst_int > 1e-3 && res.outcome.diagnostics.empty()) {
        res.outcome.diagnostics = "association entry " + std::to_string(worst_int) +
                                  " away from integrality at rounding";
    }
    res.final_iterate = std::move(it);
    res.outcome.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace cfmimo
