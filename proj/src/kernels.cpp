#include "cfmimo/kernels.hpp"

#include <cmath>

namespace cfmimo::kernels {

namespace {
constexpr int kSumChunks = 64;
constexpr int kParallelCutoff = 4096;  // below this, threading overhead dominates

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }
inline double log2e() { return 1.4426950408889634; }
}  // namespace

SeWorkspace make_workspace(const Realization &r, const NetworkConfig &cfg) {
    SeWorkspace ws;
    ws.M = r.num_aps();
    ws.K = r.num_ues();
    ws.rho_d = cfg.dl_power;
    ws.prelog = cfg.prelog();
    ws.sig = Mat(ws.M, ws.K);
    ws.nu = Mat(ws.M, ws.K);
    for (int m = 0; m < ws.M; ++m) {
        double zf_gain = cfg.antennas_per_ap - static_cast<double>(r.strong_sets[m].size());
        for (int k = 0; k < ws.K; ++k) {
            ws.sig(m, k) = std::sqrt(cfg.dl_power * zf_gain * r.sigma_sq(m, k));
            double protect = r.in_strong_set(m, k) ? r.sigma_sq(m, k) : 0.0;
            ws.nu(m, k) = r.beta(m, k) - protect;
        }
    }
    return ws;
}

double deterministic_sum(const double *v, size_t n) {
    if (n == 0) return 0.0;
    double partial[kSumChunks] = {};
    const size_t chunk = (n + kSumChunks - 1) / kSumChunks;
#pragma omp parallel for schedule(static) if (n > size_t(kParallelCutoff))
    for (int c = 0; c < kSumChunks; ++c) {
        size_t lo = c * chunk;
        size_t hi = std::min(n, lo + chunk);
        double acc = 0.0;
        for (size_t i = lo; i < hi; ++i) acc += v[i];
        partial[c] = acc;
    }
    double total = 0.0;
    for (int c = 0; c < kSumChunks; ++c) total += partial[c];
    return total;
}

std::vector<double> row_power(const Mat &theta) {
    std::vector<double> p(theta.rows, 0.0);
#pragma omp parallel for schedule(static) if (theta.size() > size_t(kParallelCutoff))
    for (int m = 0; m < theta.rows; ++m) {
        double acc = 0.0;
        for (int k = 0; k < theta.cols; ++k) acc += theta(m, k) * theta(m, k);
        p[m] = acc;
    }
    return p;
}

std::vector<double> signal_amplitude(const Mat &theta, const SeWorkspace &ws) {
    std::vector<double> amp(ws.K, 0.0);
#pragma omp parallel for schedule(static) if (theta.size() > size_t(kParallelCutoff))
    for (int k = 0; k < ws.K; ++k) {
        double acc = 0.0;
        for (int m = 0; m < ws.M; ++m) acc += ws.sig(m, k) * theta(m, k);
        amp[k] = acc;
    }
    return amp;
}

std::vector<double> interference(const std::vector<double> &row_pow, const SeWorkspace &ws) {
    std::vector<double> v(ws.K, 0.0);
#pragma omp parallel for schedule(static) if (ws.sig.size() > size_t(kParallelCutoff))
    for (int k = 0; k < ws.K; ++k) {
        double acc = 0.0;
        for (int m = 0; m < ws.M; ++m) acc += ws.nu(m, k) * row_pow[m];
        v[k] = ws.rho_d * acc + 1.0;
    }
    return v;
}

std::vector<double> se_from_terms(const std::vector<double> &amp, const std::vector<double> &interf,
                                  const SeWorkspace &ws) {
    std::vector<double> se(ws.K, 0.0);
    for (int k = 0; k < ws.K; ++k) {
        se[k] = ws.prelog * std::log2(1.0 + amp[k] * amp[k] / interf[k]);
    }
    return se;
}

std::vector<double> spectral_efficiency(const Mat &theta, const SeWorkspace &ws) {
    return se_from_terms(signal_amplitude(theta, ws), interference(row_power(theta), ws), ws);
}

ObjectiveTerms objective(const Mat &theta, const Mat &z, const SeWorkspace &ws, const PenaltyConfig &pc) {
    const int M = ws.M;
    const int K = ws.K;
    const size_t n = theta.size();

    auto amp = signal_amplitude(theta, ws);
    auto interf = interference(row_power(theta), ws);
    auto se = se_from_terms(amp, interf, ws);

    ObjectiveTerms t;
    for (int k = 0; k < K; ++k) t.h -= se[k];

    if (pc.q1_active) {
        std::vector<double> term(n);
#pragma omp parallel for schedule(static) if (n > size_t(kParallelCutoff))
        for (int i = 0; i < static_cast<int>(n); ++i) {
            double zz = z.data[i] * z.data[i];
            term[i] = zz - zz * zz;
        }
        t.q1 = deterministic_sum(term.data(), n);
    }
    if (pc.q2_active) {
        for (int k = 0; k < K; ++k) {
            double gap = hinge(pc.qos_se - se[k]);
            t.q2 += gap * gap;
        }
    }
    if (pc.q3_active) {
        std::vector<double> colz(K, 0.0);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) colz[k] += z(m, k) * z(m, k);
        for (int k = 0; k < K; ++k) {
            double gap = hinge(1.0 - colz[k]);
            t.q3 += gap * gap;
        }
        std::vector<double> term(n);
#pragma omp parallel for schedule(static) if (n > size_t(kParallelCutoff))
        for (int i = 0; i < static_cast<int>(n); ++i) {
            double gap = hinge(theta.data[i] * theta.data[i] - z.data[i] * z.data[i]);
            term[i] = gap * gap;
        }
        t.q3 += deterministic_sum(term.data(), n);
    }
    if (pc.q4_active) {
        std::vector<double> loads(M, 0.0);
#pragma omp parallel for schedule(static) if (n > size_t(kParallelCutoff))
        for (int m = 0; m < M; ++m) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += z(m, k) * z(m, k) * se[k];
            loads[m] = acc;
        }
        for (int m = 0; m < M; ++m) {
            double gap = hinge(loads[m] - pc.fronthaul_cap);
            t.q4 += gap * gap;
        }
    }
    t.f = t.h + pc.chi * (pc.mu[0] * t.q1 + pc.mu[1] * t.q2 + pc.mu[2] * t.q3 + pc.mu[3] * t.q4);
    return t;
}

std::vector<double> gradient(const Mat &theta, const Mat &z, const SeWorkspace &ws,
                             const PenaltyConfig &pc, const std::vector<std::uint8_t> *frozen_theta) {
    const int M = ws.M;
    const int K = ws.K;
    const size_t n = theta.size();
    const double cpre = ws.prelog * log2e();  // prelog / ln 2

    auto amp = signal_amplitude(theta, ws);
    auto interf = interference(row_power(theta), ws);
    auto se = se_from_terms(amp, interf, ws);

    // Per-UE weight on dSE_i: the -sum SE part plus the active hinge terms.
    std::vector<double> cw(K, -1.0);
    std::vector<double> fh(M, 0.0);
    if (pc.q4_active) {
        for (int m = 0; m < M; ++m) {
            double load = 0.0;
            for (int k = 0; k < K; ++k) load += z(m, k) * z(m, k) * se[k];
            fh[m] = hinge(load - pc.fronthaul_cap);
        }
        for (int k = 0; k < K; ++k) {
            double w4 = 0.0;
            for (int m = 0; m < M; ++m) w4 += 2.0 * fh[m] * z(m, k) * z(m, k);
            cw[k] += pc.chi * pc.mu[3] * w4;
        }
    }
    if (pc.q2_active) {
        for (int k = 0; k < K; ++k) cw[k] -= 2.0 * pc.chi * pc.mu[1] * hinge(pc.qos_se - se[k]);
    }

    std::vector<double> psi(K);  // d log terms of SE_i w.r.t. the interference
    std::vector<double> own(K);  // coefficient of the coherent-signal derivative
    for (int k = 0; k < K; ++k) {
        double s = amp[k] * amp[k];
        psi[k] = 1.0 / (s + interf[k]) - 1.0 / interf[k];
        own[k] = cpre * cw[k] * 2.0 * amp[k] / (s + interf[k]);
    }

    std::vector<double> colz(K, 0.0);
    if (pc.q3_active) {
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) colz[k] += z(m, k) * z(m, k);
    }

    std::vector<double> grad(2 * n, 0.0);
#pragma omp parallel for schedule(static) if (n > size_t(kParallelCutoff))
    for (int m = 0; m < M; ++m) {
        double gm = 0.0;
        for (int i = 0; i < K; ++i) gm += cw[i] * ws.nu(m, i) * psi[i];
        gm *= cpre * 2.0 * ws.rho_d;
        for (int k = 0; k < K; ++k) {
            const size_t idx = static_cast<size_t>(m) * K + k;
            double th = theta(m, k);
            double g = own[k] * ws.sig(m, k) + gm * th;
            if (pc.q3_active) {
                g += pc.chi * pc.mu[2] * 4.0 * hinge(th * th - z(m, k) * z(m, k)) * th;
            }
            if (frozen_theta && (*frozen_theta)[idx]) g = 0.0;
            grad[idx] = g;

            double zv = z(m, k);
            double gz = 0.0;
            if (pc.q1_active) gz += pc.mu[0] * (2.0 * zv - 4.0 * zv * zv * zv);
            if (pc.q3_active) {
                gz -= pc.mu[2] * 4.0 * hinge(th * th - zv * zv) * zv;
                gz -= pc.mu[2] * 4.0 * hinge(1.0 - colz[k]) * zv;
            }
            if (pc.q4_active) gz += pc.mu[3] * 4.0 * fh[m] * zv * se[k];
            grad[n + idx] = pc.chi * gz;
        }
    }
    return grad;
}

namespace ref {

std::vector<double> spectral_efficiency(const Mat &theta, const SeWorkspace &ws) {
    std::vector<double> se(ws.K, 0.0);
    for (int k = 0; k < ws.K; ++k) {
        double u = 0.0;
        for (int m = 0; m < ws.M; ++m) u += ws.sig(m, k) * theta(m, k);
        double v = 1.0;
        for (int l = 0; l < ws.K; ++l)
            for (int m = 0; m < ws.M; ++m)
                v += ws.rho_d * theta(m, l) * theta(m, l) * ws.nu(m, k);
        se[k] = ws.prelog * std::log2(1.0 + u * u / v);
    }
    return se;
}

ObjectiveTerms objective(const Mat &theta, const Mat &z, const SeWorkspace &ws, const PenaltyConfig &pc) {
    const int M = ws.M;
    const int K = ws.K;
    auto se = ref::spectral_efficiency(theta, ws);

    ObjectiveTerms t;
    for (int k = 0; k < K; ++k) t.h -= se[k];
    if (pc.q1_active) {
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) {
                double zz = z(m, k) * z(m, k);
                t.q1 += zz - zz * zz;
            }
    }
    if (pc.q2_active) {
        for (int k = 0; k < K; ++k) {
            double gap = hinge(pc.qos_se - se[k]);
            t.q2 += gap * gap;
        }
    }
    if (pc.q3_active) {
        for (int k = 0; k < K; ++k) {
            double colz = 0.0;
            for (int m = 0; m < M; ++m) colz += z(m, k) * z(m, k);
            double gap = hinge(1.0 - colz);
            t.q3 += gap * gap;
        }
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) {
                double gap = hinge(theta(m, k) * theta(m, k) - z(m, k) * z(m, k));
                t.q3 += gap * gap;
            }
    }
    if (pc.q4_active) {
        for (int m = 0; m < M; ++m) {
            double load = 0.0;
            for (int k = 0; k < K; ++k) load += z(m, k) * z(m, k) * se[k];
            double gap = hinge(load - pc.fronthaul_cap);
            t.q4 += gap * gap;
        }
    }
    t.f = t.h + pc.chi * (pc.mu[0] * t.q1 + pc.mu[1] * t.q2 + pc.mu[2] * t.q3 + pc.mu[3] * t.q4);
    return t;
}

std::vector<double> gradient(const Mat &theta, const Mat &z, const SeWorkspace &ws,
                             const PenaltyConfig &pc, const std::vector<std::uint8_t> *frozen_theta) {
    const int M = ws.M;
    const int K = ws.K;
    const size_t n = theta.size();
    const double cpre = ws.prelog * log2e();

    std::vector<double> amp(K, 0.0), interf(K, 1.0), se(K, 0.0);
    for (int k = 0; k < K; ++k) {
        for (int m = 0; m < M; ++m) amp[k] += ws.sig(m, k) * theta(m, k);
        for (int l = 0; l < K; ++l)
            for (int m = 0; m < M; ++m)
                interf[k] += ws.rho_d * theta(m, l) * theta(m, l) * ws.nu(m, k);
        se[k] = ws.prelog * std::log2(1.0 + amp[k] * amp[k] / interf[k]);
    }
    std::vector<double> fh(M, 0.0);
    for (int m = 0; m < M; ++m) {
        double load = 0.0;
        for (int k = 0; k < K; ++k) load += z(m, k) * z(m, k) * se[k];
        fh[m] = hinge(load - pc.fronthaul_cap);
    }

    // dSE_i / dtheta_mk assembled literally from the two log terms.
    auto dse = [&](int i, int m, int k) {
        double du = (i == k) ? 2.0 * amp[k] * ws.sig(m, k) : 0.0;
        double dv = 2.0 * ws.rho_d * ws.nu(m, i) * theta(m, k);
        double s = amp[i] * amp[i];
        return cpre * ((du + dv) / (s + interf[i]) - dv / interf[i]);
    };

    std::vector<double> grad(2 * n, 0.0);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const size_t idx = static_cast<size_t>(m) * K + k;
            double g = 0.0;
            for (int i = 0; i < K; ++i) g -= dse(i, m, k);
            if (pc.q2_active) {
                for (int i = 0; i < K; ++i)
                    g -= pc.chi * pc.mu[1] * 2.0 * hinge(pc.qos_se - se[i]) * dse(i, m, k);
            }
            if (pc.q3_active) {
                double th = theta(m, k);
                g += pc.chi * pc.mu[2] * 4.0 * hinge(th * th - z(m, k) * z(m, k)) * th;
            }
            if (pc.q4_active) {
                for (int mm = 0; mm < M; ++mm) {
                    double inner = 0.0;
                    for (int i = 0; i < K; ++i) inner += z(mm, i) * z(mm, i) * dse(i, m, k);
                    g += pc.chi * pc.mu[3] * 2.0 * fh[mm] * inner;
                }
            }
            if (frozen_theta && (*frozen_theta)[idx]) g = 0.0;
            grad[idx] = g;

            double zv = z(m, k);
            double gz = 0.0;
            if (pc.q1_active) gz += pc.mu[0] * (2.0 * zv - 4.0 * zv * zv * zv);
            if (pc.q3_active) {
                double colz = 0.0;
                for (int mm = 0; mm < M; ++mm) colz += z(mm, k) * z(mm, k);
                gz -= pc.mu[2] * 4.0 * hinge(theta(m, k) * theta(m, k) - zv * zv) * zv;
                gz -= pc.mu[2] * 4.0 * hinge(1.0 - colz) * zv;
            }
            if (pc.q4_active) gz += pc.mu[3] * 4.0 * fh[m] * zv * se[k];
            grad[n + idx] = pc.chi * gz;
        }
    }
    return grad;
}

}  // namespace ref
}  // namespace cfmimo::kernels
