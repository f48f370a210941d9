#include "cfmimo/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "cfmimo/apg.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/rng.hpp"
#include "cfmimo/sca.hpp"
#include "cfmimo/se_model.hpp"

namespace cfmimo {

namespace {

// Exact projection onto {x >= 0, ||x|| <= radius} by enumerating the
// complementarity support sets.
std::vector<double> project_ball_orthant_oracle(const std::vector<double> &r, double radius) {
    const int K = static_cast<int>(r.size());
    std::vector<double> best(K, 0.0);
    double best_d = 0.0;
    for (int i = 0; i < K; ++i) best_d += r[i] * r[i];  // distance of the origin
    for (int mask = 1; mask < (1 << K); ++mask) {
        double norm_sq = 0.0;
        bool neg = false;
        for (int i = 0; i < K; ++i)
            if (mask & (1 << i)) {
                if (r[i] < 0.0) neg = true;
                norm_sq += r[i] * r[i];
            }
        for (int ball_active = 0; ball_active < 2; ++ball_active) {
            if (neg) continue;
            std::vector<double> cand(K, 0.0);
            double scale = ball_active ? radius / std::sqrt(std::max(norm_sq, 1e-300)) : 1.0;
            for (int i = 0; i < K; ++i)
                if (mask & (1 << i)) cand[i] = r[i] * scale;
            double cn = 0.0;
            bool ok = true;
            for (int i = 0; i < K; ++i) {
                if (cand[i] < 0.0) ok = false;
                cn += cand[i] * cand[i];
            }
            if (!ok || cn > radius * radius + 1e-12) continue;
            double d = 0.0;
            for (int i = 0; i < K; ++i) d += (cand[i] - r[i]) * (cand[i] - r[i]);
            if (d < best_d) {
                best_d = d;
                best = cand;
            }
        }
    }
    return best;
}

CheckResult check_gradient(bool quick) {
    CheckResult res{"gradient_vs_finite_differences", true, ""};
    const int instances = quick ? 5 : 20;
    NetworkConfig cfg = make_config(5, 3, 2);
    ApgParams params;
    double worst = 0.0;
    std::mt19937_64 eng(12345);
    std::uniform_real_distribution<double> uni(0.05, 0.95);

    for (int inst = 0; inst < instances; ++inst) {
        Realization r = make_realization(cfg, 1000 + inst);
        const int M = cfg.num_aps, K = cfg.num_ues;
        Mat theta(M, K), z(M, K);
        for (int m = 0; m < M; ++m) {
            for (int k = 0; k < K; ++k) {
                theta(m, k) = uni(eng) / std::sqrt(static_cast<double>(K));
                z(m, k) = uni(eng);
            }
            std::span<double> row(&theta.data[static_cast<size_t>(m) * K], K);
            project_theta_row(row);
            std::span<double> zrow(&z.data[static_cast<size_t>(m) * K], K);
            project_z_row(zrow, cfg.max_served);
        }
        // Keep clear of hinge kinks so central differences see a smooth f.
        for (size_t i = 0; i < theta.size(); ++i) {
            if (std::fabs(theta.data[i] * theta.data[i] - z.data[i] * z.data[i]) < 1e-3) {
                z.data[i] = std::min(1.0, z.data[i] + 0.05);
            }
        }

        double chi = 4.0;
        auto grad = apg_gradient(theta, z, r, cfg, params, chi);
        const size_t n = theta.size();
        const double h = 1e-6;
        for (size_t i = 0; i < 2 * n; ++i) {
            Mat tp = theta, tm = theta, zp = z, zm = z;
            if (i < n) {
                tp.data[i] += h;
                tm.data[i] -= h;
            } else {
                zp.data[i - n] += h;
                zm.data[i - n] -= h;
            }
            double fp = penalty_terms(tp, zp, r, cfg, params, chi).f;
            double fm = penalty_terms(tm, zm, r, cfg, params, chi).f;
            double fd = (fp - fm) / (2.0 * h);
            double rel = std::fabs(grad[i] - fd) / std::max({std::fabs(grad[i]), std::fabs(fd), 1.0});
            worst = std::max(worst, rel);
        }
    }
    std::ostringstream os;
    os << "max scaled error " << worst << " over " << instances << " instances";
    res.detail = os.str();
    res.pass = worst <= 1e-5;
    return res;
}

CheckResult check_projections(bool quick) {
    CheckResult res{"projection_oracles", true, ""};
    const int draws = quick ? 100 : 500;
    std::mt19937_64 eng(777);
    std::uniform_real_distribution<double> uni(-2.0, 3.0);
    double worst_theta = 0.0, worst_z = 0.0;
    for (int d = 0; d < draws; ++d) {
        int K = 2 + static_cast<int>(eng() % 3);
        std::vector<double> r(K);
        for (double &v : r) v = uni(eng);

        std::vector<double> fast = r;
        project_theta_row(fast);
        auto oracle = project_ball_orthant_oracle(r, 1.0);
        for (int i = 0; i < K; ++i) worst_theta = std::max(worst_theta, std::fabs(fast[i] - oracle[i]));

        double k_hat = 1.0 + static_cast<double>(eng() % 3);
        std::vector<double> fastz = r;
        project_z_row(fastz, k_hat);
        auto stage1 = project_ball_orthant_oracle(r, std::sqrt(k_hat));
        for (double &v : stage1) v = std::min(v, 1.0);
        for (int i = 0; i < K; ++i) worst_z = std::max(worst_z, std::fabs(fastz[i] - stage1[i]));
    }
    std::ostringstream os;
    os << "ball-orthant max dev " << worst_theta << ", composed-z max dev " << worst_z;
    res.detail = os.str();
    res.pass = worst_theta <= 1e-6 && worst_z <= 1e-6;
    return res;
}

CheckResult check_estimator_statistics(bool quick) {
    CheckResult res{"estimate_variance_monte_carlo", true, ""};
    const int samples = quick ? 20000 : 100000;
    const double tol = quick ? 0.04 : 0.02;
    double worst = 0.0;
    int tau_p = 2;
    for (double beta : {0.1, 1.0, 10.0}) {
        for (double energy : {0.5, 1.0, 10.0}) {
            double rho_p = energy / tau_p;
            auto sim = simulate_mmse_estimate(beta, rho_p, tau_p, samples, 42);
            double closed = channel_estimate_variance(beta, rho_p, tau_p);
            worst = std::max(worst, std::fabs(sim.estimate_mean_sq - closed) / closed);
        }
    }
    std::ostringstream os;
    os << "max relative deviation " << worst << " at " << samples << " samples";
    res.detail = os.str();
    res.pass = worst <= tol;
    return res;
}

CheckResult check_surrogates(bool quick) {
    CheckResult res{"surrogate_tightness_and_bounds", true, ""};
    const int samples = quick ? 200 : 1000;
    std::mt19937_64 eng(99);
    std::uniform_real_distribution<double> uni(0.2, 5.0);
    double worst_tight = 0.0;
    bool bounds_ok = true;
    const double prelog = 0.95;
    auto se_tilde = [&](double u, double w) { return prelog * std::log2(1.0 + u * u / w); };
    for (int s = 0; s < samples; ++s) {
        double u0 = uni(eng), w0 = 1.0 + uni(eng);
        worst_tight = std::max(worst_tight,
                               std::fabs(surrogate_se_lower(u0, w0, u0, w0, prelog) - se_tilde(u0, w0)));
        worst_tight = std::max(worst_tight,
                               std::fabs(surrogate_se_upper(u0, w0, u0, w0, prelog) - se_tilde(u0, w0)));
        double u = uni(eng), w = 1.0 + uni(eng);
        if (surrogate_se_lower(u, w, u0, w0, prelog) > se_tilde(u, w) + 1e-9) bounds_ok = false;
        if (surrogate_se_upper(u, w, u0, w0, prelog) < se_tilde(u, w) - 1e-9) bounds_ok = false;
    }
    std::ostringstream os;
    os << "tightness deviation " << worst_tight << (bounds_ok ? ", bounds hold" : ", BOUND VIOLATION");
    res.detail = os.str();
    res.pass = worst_tight <= 1e-9 && bounds_ok;
    return res;
}

}  // namespace

std::vector<CheckResult> run_validation_suite(bool quick) {
    std::vector<CheckResult> out;
    out.push_back(check_estimator_statistics(quick));
    out.push_back(check_projections(quick));
    out.push_back(check_surrogates(quick));
    out.push_back(check_gradient(quick));
    return out;
}

}  // namespace cfmimo
