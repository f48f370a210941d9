#include "cfmimo/apg.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "cfmimo/baselines.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/se_model.hpp"

namespace cfmimo {

namespace {

kernels::PenaltyConfig make_penalty_config(const NetworkConfig &cfg, const ApgParams &p, double chi) {
    kernels::PenaltyConfig pc;
    pc.qos_se = cfg.qos_se;
    pc.fronthaul_cap = cfg.fronthaul_cap;
    for (int i = 0; i < 4; ++i) pc.mu[i] = p.mu[i];
    pc.chi = chi;
    return pc;
}

double squared_distance(const Mat &a1, const Mat &a2, const Mat &b1, const Mat &b2) {
    double acc = 0.0;
    for (size_t i = 0; i < a1.size(); ++i) {
        double d = a1.data[i] - b1.data[i];
        acc += d * d;
    }
    for (size_t i = 0; i < a2.size(); ++i) {
        double d = a2.data[i] - b2.data[i];
        acc += d * d;
    }
    return acc;
}

void project_all(Mat &theta, Mat &z, double k_hat, const std::vector<std::uint8_t> *frozen_theta,
                 bool optimize_z) {
    const int K = theta.cols;
    for (int m = 0; m < theta.rows; ++m) {
        std::span<double> trow(&theta.data[static_cast<size_t>(m) * K], K);
        if (frozen_theta) {
            for (int k = 0; k < K; ++k)
                if ((*frozen_theta)[static_cast<size_t>(m) * K + k]) trow[k] = 0.0;
        }
        project_theta_row(trow);
        if (optimize_z) {
            std::span<double> zrow(&z.data[static_cast<size_t>(m) * K], K);
            project_z_row(zrow, k_hat);
        }
    }
}

}  // namespace

kernels::ObjectiveTerms penalty_terms(const Mat &theta, const Mat &z, const Realization &r,
                                      const NetworkConfig &cfg, const ApgParams &p, double chi) {
    auto ws = kernels::make_workspace(r, cfg);
    return kernels::objective(theta, z, ws, make_penalty_config(cfg, p, chi));
}

std::vector<double> apg_gradient(const Mat &theta, const Mat &z, const Realization &r,
                                 const NetworkConfig &cfg, const ApgParams &p, double chi) {
    auto ws = kernels::make_workspace(r, cfg);
    return kernels::gradient(theta, z, ws, make_penalty_config(cfg, p, chi));
}

void project_theta_row(std::span<double> row) {
    double norm_sq = 0.0;
    for (double &v : row) {
        if (v < 0.0) v = 0.0;
        norm_sq += v * v;
    }
    if (norm_sq > 1.0) {
        double scale = 1.0 / std::sqrt(norm_sq);
        for (double &v : row) v *= scale;
    }
}

void project_z_row(std::span<double> row, double k_hat) {
    double norm_sq = 0.0;
    for (double &v : row) {
        if (v < 0.0) v = 0.0;
        norm_sq += v * v;
    }
    if (norm_sq > k_hat) {
        double scale = std::sqrt(k_hat / norm_sq);
        for (double &v : row) v *= scale;
    }
    for (double &v : row) {
        if (v > 1.0) v = 1.0;
    }
}

InnerResult apg_inner(ApgState &state, const kernels::SeWorkspace &ws, const NetworkConfig &cfg,
                      const ApgParams &p, const std::vector<std::uint8_t> *frozen_theta,
                      bool optimize_z) {
    const size_t n = state.theta.size();
    kernels::PenaltyConfig pc;
    pc.qos_se = cfg.qos_se;
    pc.fronthaul_cap = cfg.fronthaul_cap;
    for (int i = 0; i < 4; ++i) pc.mu[i] = p.mu[i];
    pc.chi = state.chi;
    if (!optimize_z) {
        pc.q1_active = pc.q3_active = pc.q4_active = false;
    }

    auto eval = [&](const Mat &th, const Mat &zz) { return kernels::objective(th, zz, ws, pc); };

    Mat vbar_t(ws.M, ws.K), vbar_z(ws.M, ws.K);
    Mat cand_t(ws.M, ws.K), cand_z(ws.M, ws.K);
    Mat corr_t(ws.M, ws.K), corr_z(ws.M, ws.K);

    std::deque<double> f_hist;  // accepted-objective history for the 10-step test
    f_hist.push_back(state.f_cur);
    double h_prev = eval(state.theta, state.z).h;

    InnerResult res;
    for (int it = 0; it < p.max_inner; ++it) {
        const double w1 = state.q_prev / state.q_cur;
        const double w2 = (state.q_prev - 1.0) / state.q_cur;
        for (size_t i = 0; i < n; ++i) {
            vbar_t.data[i] = state.theta.data[i] + w1 * (state.theta_tilde.data[i] - state.theta.data[i]) +
                             w2 * (state.theta.data[i] - state.theta_prev.data[i]);
            vbar_z.data[i] = state.z.data[i] + w1 * (state.z_tilde.data[i] - state.z.data[i]) +
                             w2 * (state.z.data[i] - state.z_prev.data[i]);
        }
        if (!optimize_z) vbar_z = state.z;

        auto grad = kernels::gradient(vbar_t, vbar_z, ws, pc, frozen_theta);
        for (size_t i = 0; i < n; ++i) {
            cand_t.data[i] = vbar_t.data[i] - p.alpha_vbar * grad[i];
            cand_z.data[i] = optimize_z ? vbar_z.data[i] - p.alpha_vbar * grad[n + i] : state.z.data[i];
        }
        project_all(cand_t, cand_z, cfg.max_served, frozen_theta, optimize_z);

        auto cand_terms = eval(cand_t, cand_z);
        if (!std::isfinite(cand_terms.f)) {
            throw std::runtime_error("apg_inner: objective became non-finite (check step sizes)");
        }

        state.theta_tilde = cand_t;
        state.z_tilde = cand_z;

        Mat *next_t = &cand_t;
        Mat *next_z = &cand_z;
        double f_next = cand_terms.f;
        double h_next = cand_terms.h;
        double dist = squared_distance(cand_t, cand_z, vbar_t, vbar_z);
        if (!(cand_terms.f <= state.c - p.zeta * dist)) {
            // Correction step from the current iterate with its own step size.
            auto grad_cur = kernels::gradient(state.theta, state.z, ws, pc, frozen_theta);
            for (size_t i = 0; i < n; ++i) {
                corr_t.data[i] = state.theta.data[i] - p.alpha_v * grad_cur[i];
                corr_z.data[i] = optimize_z ? state.z.data[i] - p.alpha_v * grad_cur[n + i] : state.z.data[i];
            }
            project_all(corr_t, corr_z, cfg.max_served, frozen_theta, optimize_z);
            auto corr_terms = eval(corr_t, corr_z);
            if (!std::isfinite(corr_terms.f)) {
                throw std::runtime_error("apg_inner: objective became non-finite (check step sizes)");
            }
            if (corr_terms.f < cand_terms.f) {
                next_t = &corr_t;
                next_z = &corr_z;
                f_next = corr_terms.f;
                h_next = corr_terms.h;
            }
        }

        const double f_old = state.f_cur;  // objective of the pre-update iterate
        state.theta_prev = state.theta;
        state.z_prev = state.z;
        state.theta = *next_t;
        state.z = *next_z;
        state.f_cur = f_next;

        double q_next = 0.5 * (1.0 + std::sqrt(4.0 * state.q_cur * state.q_cur + 1.0));
        state.q_prev = state.q_cur;
        state.q_cur = q_next;

        double b_next = p.zeta * state.b + 1.0;
        state.c = (p.zeta * state.b * state.c + f_old) / b_next;
        state.b = b_next;

        ++state.iter;
        ++res.iterations;

        f_hist.push_back(f_next);
        if (f_hist.size() > 11) f_hist.pop_front();
        if (f_hist.size() == 11 && std::fabs(f_next) > 0.0 &&
            std::fabs((f_next - f_hist.front()) / f_next) <= p.eps_inner) {
            return res;
        }
        if (std::fabs(h_next) > 0.0 && std::fabs((h_next - h_prev) / h_next) <= p.eps_inner) {
            return res;
        }
        h_prev = h_next;
    }
    res.hit_cap = true;
    return res;
}

namespace {

std::pair<Mat, Mat> structured_init(const Realization &r, const NetworkConfig &cfg) {
    AssocVars heu = heu_associate(r, cfg);
    const int M = r.num_aps();
    const int K = r.num_ues();
    Mat theta(M, K), z(M, K);
    const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.max_served));
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            z(m, k) = heu.a(m, k);
            theta(m, k) = heu.a(m, k) * amp;
        }
    }
    return {theta, z};
}

std::pair<Mat, Mat> random_init(const Realization &r, const NetworkConfig &cfg) {
    const int M = r.num_aps();
    const int K = r.num_ues();
    auto eng = make_engine(derive_seed(r.seed, 3));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Mat theta(M, K), z(M, K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            theta(m, k) = uni(eng);
            z(m, k) = uni(eng);
        }
    }
    project_all(theta, z, cfg.max_served, nullptr, true);
    return {theta, z};
}

// Threshold rounding with repair: every UE keeps at least one AP, every AP at
// most max_served UEs.
Mat round_association(const Mat &z, const Realization &r, const NetworkConfig &cfg) {
    const int M = z.rows;
    const int K = z.cols;
    Mat a(M, K, 0.0);
    for (size_t i = 0; i < z.size(); ++i) a.data[i] = (z.data[i] * z.data[i] >= 0.5) ? 1.0 : 0.0;

    std::vector<int> row_count(M, 0), col_count(K, 0);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k)
            if (a(m, k) > 0.5) {
                ++row_count[m];
                ++col_count[k];
            }

    for (int k = 0; k < K; ++k) {
        if (col_count[k] > 0) continue;
        int best = 0;
        for (int m = 1; m < M; ++m)
            if (r.beta(m, k) > r.beta(best, k)) best = m;
        a(best, k) = 1.0;
        ++row_count[best];
        ++col_count[k];
    }

    for (int m = 0; m < M; ++m) {
        int guard = K + 1;
        while (row_count[m] > cfg.max_served && guard-- > 0) {
            // Drop the weakest assignment whose UE stays covered elsewhere.
            int drop = -1;
            for (int k = 0; k < K; ++k) {
                if (a(m, k) < 0.5 || col_count[k] < 2) continue;
                if (drop < 0 || r.beta(m, k) < r.beta(m, drop)) drop = k;
            }
            if (drop >= 0) {
                a(m, drop) = 0.0;
                --row_count[m];
                --col_count[drop];
                continue;
            }
            // All UEs here are single-covered: move the weakest one to its best
            // AP with spare capacity.
            int k0 = -1;
            for (int k = 0; k < K; ++k)
                if (a(m, k) > 0.5 && (k0 < 0 || r.beta(m, k) < r.beta(m, k0))) k0 = k;
            int dest = -1;
            for (int mm = 0; mm < M; ++mm) {
                if (mm == m || row_count[mm] >= cfg.max_served) continue;
                if (dest < 0 || r.beta(mm, k0) > r.beta(dest, k0)) dest = mm;
            }
            if (k0 < 0 || dest < 0) break;  // cannot repair; feasibility report will flag it
            a(m, k0) = 0.0;
            a(dest, k0) = 1.0;
            --row_count[m];
            ++row_count[dest];
        }
    }
    return a;
}

}  // namespace

ApgResult apg_solve(const Realization &r, const NetworkConfig &cfg, const ApgParams &p,
                    std::optional<std::pair<Mat, Mat>> init) {
    auto t0 = std::chrono::steady_clock::now();
    auto ws = kernels::make_workspace(r, cfg);

    ApgState st;
    auto start = init.has_value() ? std::move(*init)
                                  : (p.random_init ? random_init(r, cfg) : structured_init(r, cfg));
    st.theta = std::move(start.first);
    st.z = std::move(start.second);
    project_all(st.theta, st.z, cfg.max_served, nullptr, true);
    st.theta_prev = st.theta_tilde = st.theta;
    st.z_prev = st.z_tilde = st.z;
    st.chi = p.chi_init;

    kernels::PenaltyConfig pc;
    pc.qos_se = cfg.qos_se;
    pc.fronthaul_cap = cfg.fronthaul_cap;
    for (int i = 0; i < 4; ++i) pc.mu[i] = p.mu[i];

    ApgResult res;
    bool penalties_ok = false;
    int total_iters = 0;
    const int M = r.num_aps();
    const int K = r.num_ues();
    for (int outer = 0; outer < p.max_outer; ++outer) {
        pc.chi = st.chi;
        st.f_cur = kernels::objective(st.theta, st.z, ws, pc).f;
        st.b = 1.0;
        st.c = st.f_cur;
        st.theta_prev = st.theta;
        st.z_prev = st.z;
        st.theta_tilde = st.theta;
        st.z_tilde = st.z;

        apg_inner(st, ws, cfg, p);
        total_iters = st.iter;

        auto terms = kernels::objective(st.theta, st.z, ws, pc);
        res.outcome.objective_trace.push_back(terms.f);
        if (terms.q1 / (M * K) <= p.eps && terms.q2 / K <= p.eps && terms.q3 / (M * K) <= p.eps &&
            terms.q4 / M <= p.eps) {
            penalties_ok = true;
            break;
        }
        st.chi *= p.delta;
    }

    res.assoc = round_association(st.z, r, cfg);
    res.z = st.z;
    res.theta = st.theta;
    for (size_t i = 0; i < res.theta.size(); ++i) {
        if (res.assoc.data[i] < 0.5) res.theta.data[i] = 0.0;
    }
    for (int m = 0; m < M; ++m) {
        std::span<double> row(&res.theta.data[static_cast<size_t>(m) * K], K);
        project_theta_row(row);
    }

    // Rounding shifts the loads slightly; a uniform power scale-down restores
    // the fronthaul cap at negligible SE cost (loads are monotone in the
    // scale, so bisection applies).
    {
        AssocVars av{res.assoc, false};
        auto load_excess = [&](double scale) {
            Mat th = res.theta;
            for (double &v : th.data) v *= scale;
            auto se = kernels::spectral_efficiency(th, ws);
            auto loads = fronthaul_load(av, se);
            double worst = 0.0;
            for (double l : loads) worst = std::max(worst, l);
            return worst - cfg.fronthaul_cap;
        };
        if (load_excess(1.0) > 0.0) {
            double lo = 0.0, hi = 1.0;
            for (int it2 = 0; it2 < 60; ++it2) {
                double mid = 0.5 * (lo + hi);
                (load_excess(mid) > -1e-6 ? hi : lo) = mid;
            }
            for (double &v : res.theta.data) v *= lo;
        }
    }

    PowerAlloc pa{res.theta};
    AssocVars av{res.assoc, false};
    res.outcome.se_per_ue = se_per_ue(pa, r, cfg);
    res.outcome.sum_se = std::accumulate(res.outcome.se_per_ue.begin(), res.outcome.se_per_ue.end(), 0.0);
    res.outcome.fronthaul_per_ap = fronthaul_load(av, res.outcome.se_per_ue);
    res.outcome.feasibility = check_feasibility(pa, av, r, cfg);
    res.outcome.iterations = total_iters;
    res.outcome.converged = penalties_ok;
    if (!penalties_ok) {
        res.outcome.diagnostics = "penalty thresholds not reached within max_outer multiplier rounds";
    }
    res.outcome.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace cfmimo
