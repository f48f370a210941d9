#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/types.hpp"

namespace cfmimo {

// Log-distance path loss with lognormal shadowing. Constants follow the
// standard 2 GHz urban model used throughout the cell-free literature:
// gain_dB = -30.5 - 36.7 log10(d) + F,  F ~ N(0, 4^2) i.i.d.
inline constexpr double kPathLossOffsetDb = -30.5;
inline constexpr double kPathLossSlopeDb = 36.7;   // per decade of distance
inline constexpr double kShadowingStdDb = 4.0;
inline constexpr double kApUeHeightM = 10.0;
inline constexpr double kMinDistanceM = 1.0;       // floor to avoid singular loss

// Raw linear channel gain at 3-D distance d (meters), before shadowing.
double path_gain_linear(double distance_m);

// M x K large-scale fading matrix in linear scale. Distances use the
// wrap-around metric with the fixed AP-UE height offset; shadowing is drawn
// independently per link. Returned gains are raw (the noise normalization
// lives in the config's power fields).
Mat large_scale_fading(const std::vector<Point> &ap_pos, const std::vector<Point> &ue_pos,
                       const NetworkConfig &cfg, std::uint64_t seed);

// Per-antenna mean-square of the linear MMSE channel estimate given the
// large-scale gain and the pilot energy tau_p * rho_p.
double channel_estimate_variance(double beta, double pilot_power, int pilot_len);

// Estimate mean-square for every link of a fading matrix.
Mat estimate_variance_matrix(const Mat &beta, const NetworkConfig &cfg);

struct StrongSets {
    std::vector<std::vector<int>> sets;  // per AP: UE indices, strongest first
    std::vector<std::uint8_t> delta;     // M*K membership flags
};

// Greedy per-AP selection: UEs sorted by gain (ties to the lower index) are
// accumulated until they cover strong_set_fraction percent of the AP's total
// channel gain, then the set is truncated to antennas_per_ap - 1 so the
// zero-forcing direction count stays below the antenna count.
StrongSets select_strong_sets(const Mat &beta, const NetworkConfig &cfg);

// Full Monte-Carlo draw: geometry, fading, estimation statistics, ZF sets.
Realization make_realization(const NetworkConfig &cfg, std::uint64_t seed);

struct MmseSimulation {
    double estimate_mean_sq = 0.0;   // empirical per-antenna E{|g_hat|^2}
    double error_mean_sq = 0.0;      // empirical per-antenna E{|g_hat - g|^2}
};

// Monte-Carlo validation of the closed-form estimate statistics: simulates
// pilot reception over a single-UE orthogonal-pilot link, applies the MMSE
// projection coefficient and measures the empirical estimate mean-square.
MmseSimulation simulate_mmse_estimate(double beta, double pilot_power, int pilot_len,
                                      int num_samples, std::uint64_t seed, int antennas = 2);

}  // namespace cfmimo
