#pragma once

#include <vector>

#include "cfmimo/types.hpp"

namespace cfmimo::kernels {

// Precomputed per-realization factors for the closed-form SE expressions.
//   sig(m,k) = sqrt(rho_d * (N - |S_m|) * sigma_sq(m,k))   coherent signal coefficient
//   nu(m,k)  = beta(m,k) - delta(m,k) * sigma_sq(m,k)      residual interference gain
struct SeWorkspace {
    int M = 0;
    int K = 0;
    double rho_d = 0.0;
    double prelog = 0.0;
    Mat sig;
    Mat nu;
};

SeWorkspace make_workspace(const Realization &r, const NetworkConfig &cfg);

// Penalty configuration of the projected-gradient solver. `active` masks let
// the power-only variant drop the association penalties.
struct PenaltyConfig {
    double qos_se = 0.0;
    double fronthaul_cap = 0.0;
    double mu[4] = {50.0, 1e3, 5e4, 10.0};
    double chi = 1.0;
    bool q1_active = true;  // association integrality
    bool q2_active = true;  // per-UE QoS
    bool q3_active = true;  // coverage and power-association coupling
    bool q4_active = true;  // fronthaul load
};

struct ObjectiveTerms {
    double f = 0.0;   // penalized objective
    double h = 0.0;   // -sum SE
    double q1 = 0.0, q2 = 0.0, q3 = 0.0, q4 = 0.0;
};

// Deterministic chunked sum: the accumulation order is fixed regardless of
// the thread count, so results are bit-identical at any parallelism level.
double deterministic_sum(const double *v, size_t n);

// --- optimized kernels (OpenMP over independent outputs) ---

std::vector<double> row_power(const Mat &theta);
// amp[k] = sum_m sig(m,k) * theta(m,k); the squared value is the coherent
// signal term of the SINR.
std::vector<double> signal_amplitude(const Mat &theta, const SeWorkspace &ws);
// interference-plus-noise per UE: rho_d * sum_m nu(m,k) * row_power[m] + 1
std::vector<double> interference(const std::vector<double> &row_pow, const SeWorkspace &ws);
std::vector<double> se_from_terms(const std::vector<double> &amp, const std::vector<double> &interf,
                                  const SeWorkspace &ws);
std::vector<double> spectral_efficiency(const Mat &theta, const SeWorkspace &ws);

ObjectiveTerms objective(const Mat &theta, const Mat &z, const SeWorkspace &ws, const PenaltyConfig &pc);

// Analytic gradient of the penalized objective, packed as [d/dtheta, d/dz]
// in row-major M x K order. Entries masked out by `frozen_theta` (optional
// M*K flags) are forced to zero, which pins non-associated links.
std::vector<double> gradient(const Mat &theta, const Mat &z, const SeWorkspace &ws,
                             const PenaltyConfig &pc,
                             const std::vector<std::uint8_t> *frozen_theta = nullptr);

// --- serial reference implementations (literal triple-loop formulas) ---
// Kept for validation and benchmarking; independent of the factored algebra
// used by the optimized kernels.
namespace ref {
std::vector<double> spectral_efficiency(const Mat &theta, const SeWorkspace &ws);
ObjectiveTerms objective(const Mat &theta, const Mat &z, const SeWorkspace &ws, const PenaltyConfig &pc);
std::vector<double> gradient(const Mat &theta, const Mat &z, const SeWorkspace &ws,
                             const PenaltyConfig &pc,
                             const std::vector<std::uint8_t> *frozen_theta = nullptr);
}  // namespace ref

}  // namespace cfmimo::kernels
