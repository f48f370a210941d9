#include "cfmimo/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cfmimo/se_model.hpp"

namespace cfmimo {

AssocVars full_associate(const NetworkConfig &cfg) {
    return {Mat(cfg.num_aps, cfg.num_ues, 1.0), false};
}

AssocVars heu_associate(const Realization &r, const NetworkConfig &cfg) {
    const int M = r.num_aps();
    const int K = r.num_ues();
    AssocVars out{Mat(M, K, 0.0), false};
    std::vector<int> row_count(M, 0);
    std::vector<std::uint8_t> claimed(M, 0);

    // Phase 1: one distinct AP per UE. When more UEs than APs, the claim set
    // wraps once exhausted and distinctness is relaxed.
    int claimed_count = 0;
    for (int k = 0; k < K; ++k) {
        if (claimed_count == M) {
            std::fill(claimed.begin(), claimed.end(), 0);
            claimed_count = 0;
        }
        int best = -1;
        for (int m = 0; m < M; ++m) {
            if (claimed[m] || row_count[m] >= cfg.max_served) continue;
            if (best < 0 || r.beta(m, k) > r.beta(best, k)) best = m;
        }
        if (best < 0) continue;  // every AP at capacity; coverage flagged downstream
        out.a(best, k) = 1.0;
        claimed[best] = 1;
        ++claimed_count;
        ++row_count[best];
    }

    // Phase 2: each AP fills to the serving cap with its strongest UEs.
    std::vector<int> order(K);
    for (int m = 0; m < M; ++m) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return r.beta(m, a) > r.beta(m, b); });
        for (int k : order) {
            if (row_count[m] >= cfg.max_served) break;
            if (out.a(m, k) > 0.5) continue;
            out.a(m, k) = 1.0;
            ++row_count[m];
        }
    }
    return out;
}

PowerOptResult optimize_power_fixed_assoc(const AssocVars &assoc, const Realization &r,
                                          const NetworkConfig &cfg, const ApgParams &params) {
    auto t0 = std::chrono::steady_clock::now();
    const int M = r.num_aps();
    const int K = r.num_ues();
    auto ws = kernels::make_workspace(r, cfg);

    std::vector<std::uint8_t> frozen(static_cast<size_t>(M) * K, 0);
    std::vector<int> served(M, 0);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k)
            if (assoc.a(m, k) < 0.5) frozen[static_cast<size_t>(m) * K + k] = 1;
            else ++served[m];

    ApgState st;
    st.theta = Mat(M, K, 0.0);
    st.z = Mat(M, K, 0.0);
    for (int m = 0; m < M; ++m) {
        double amp = served[m] > 0 ? 1.0 / std::sqrt(static_cast<double>(served[m])) : 0.0;
        for (int k = 0; k < K; ++k) {
            if (assoc.a(m, k) > 0.5) {
                st.theta(m, k) = amp;
                st.z(m, k) = 1.0;
            }
        }
    }
    st.theta_prev = st.theta_tilde = st.theta;
    st.z_prev = st.z_tilde = st.z;
    st.chi = params.chi_init;

    kernels::PenaltyConfig pc;
    pc.qos_se = cfg.qos_se;
    pc.fronthaul_cap = cfg.fronthaul_cap;
    for (int i = 0; i < 4; ++i) pc.mu[i] = params.mu[i];
    pc.q1_active = pc.q3_active = pc.q4_active = false;

    PowerOptResult res;
    bool qos_ok = false;
    for (int outer = 0; outer < params.max_outer; ++outer) {
        pc.chi = st.chi;
        st.f_cur = kernels::objective(st.theta, st.z, ws, pc).f;
        st.b = 1.0;
        st.c = st.f_cur;
        st.theta_prev = st.theta_tilde = st.theta;
        st.z_prev = st.z_tilde = st.z;

        apg_inner(st, ws, cfg, params, &frozen, /*optimize_z=*/false);

        auto terms = kernels::objective(st.theta, st.z, ws, pc);
        res.outcome.objective_trace.push_back(terms.f);
        if (terms.q2 / K <= params.eps) {
            qos_ok = true;
            break;
        }
        st.chi *= params.delta;
    }

    res.theta = st.theta;
    PowerAlloc pa{res.theta};
    res.outcome.se_per_ue = se_per_ue(pa, r, cfg);
    res.outcome.sum_se = std::accumulate(res.outcome.se_per_ue.begin(), res.outcome.se_per_ue.end(), 0.0);
    res.outcome.fronthaul_per_ap = fronthaul_load(assoc, res.outcome.se_per_ue);
    res.outcome.iterations = st.iter;
    res.outcome.converged = qos_ok;
    if (!qos_ok) res.outcome.diagnostics = "QoS penalty threshold not reached within max_outer rounds";
    res.outcome.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<double> cap_fronthaul(const std::vector<double> &se, const AssocVars &assoc,
                                  const NetworkConfig &cfg) {
    auto loads = fronthaul_load(assoc, se);
    double worst = 0.0;
    for (double l : loads) worst = std::max(worst, l);
    if (worst <= cfg.fronthaul_cap || worst <= 0.0) return se;
    double scale = cfg.fronthaul_cap / worst;
    std::vector<double> capped(se.size());
    for (size_t k = 0; k < se.size(); ++k) capped[k] = se[k] * scale;
    return capped;
}

}  // namespace cfmimo
