#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cfmimo {

// Dense row-major matrix of doubles. All network-level quantities are M x K
// (access points by rows, user terminals by columns).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double &operator()(int m, int k) { return data[static_cast<size_t>(m) * cols + k]; }
    double operator()(int m, int k) const { return data[static_cast<size_t>(m) * cols + k]; }
    size_t size() const { return data.size(); }
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// All scalar parameters of one network scenario. Transmit powers are stored
// normalized by the noise power (dimensionless SNR-per-unit-gain); use
// make_config() to build a config from powers in watts.
struct NetworkConfig {
    int num_aps = 0;               // M
    int num_ues = 0;               // K
    int antennas_per_ap = 2;       // N
    int coherence_len = 200;       // symbols per coherence block
    int pilot_len = 0;             // symbols spent on pilots (>= K for orthogonality)
    double pilot_power = 0.0;      // noise-normalized pilot power
    double dl_power = 0.0;         // noise-normalized max downlink power per AP
    double qos_se = 0.2;           // minimum spectral efficiency per UE, bit/s/Hz
    double fronthaul_cap = 20.0;   // max fronthaul load per AP, bit/s/Hz
    int max_served = 0;            // max UEs served by one AP
    double area_side = 1000.0;     // side of the wrap-around square, meters
    double min_ap_separation = 50.0;
    double strong_set_fraction = 95.0;  // percent of channel gain captured by the ZF set
    double noise_figure_db = 9.0;
    double bandwidth_hz = 20e6;
    std::uint64_t rng_seed = 1;

    double prelog() const { return double(coherence_len - pilot_len) / double(coherence_len); }
    void validate() const;  // throws std::invalid_argument on violated invariants
};

// Noise power in watts for a given bandwidth and noise figure.
double noise_power_w(double bandwidth_hz, double noise_figure_db);
double noise_power_dbm(double bandwidth_hz, double noise_figure_db);

// Builds a config with pilot_len = num_ues and transmit powers given in watts
// (normalized internally by the thermal noise power).
NetworkConfig make_config(int num_aps, int num_ues, int max_served,
                          double dl_power_w = 1.0, double pilot_power_w = 0.1);

// One Monte-Carlo draw of the network: geometry, large-scale fading, channel
// estimation statistics and the per-AP zero-forcing partition.
struct Realization {
    std::vector<Point> ap_pos;
    std::vector<Point> ue_pos;
    Mat beta;                            // M x K large-scale fading, linear
    Mat sigma_sq;                        // M x K estimate mean-square, linear
    std::vector<std::vector<int>> strong_sets;  // per AP, UE indices under ZF
    std::vector<std::uint8_t> delta;     // M*K flags, 1 iff UE in the AP's ZF set
    std::uint64_t seed = 0;

    int num_aps() const { return beta.rows; }
    int num_ues() const { return beta.cols; }
    bool in_strong_set(int m, int k) const { return delta[static_cast<size_t>(m) * beta.cols + k] != 0; }
};

struct PowerAlloc {
    Mat theta;  // M x K amplitude coefficients, per-AP rows on the unit ball
};

struct AssocVars {
    Mat a;              // M x K; binary 0/1, or relaxed z in [0,1] with a = z^2
    bool relaxed = false;
};

struct ConstraintCheck {
    std::string name;
    bool pass = true;
    double worst_violation = 0.0;
};

struct FeasibilityReport {
    std::vector<ConstraintCheck> checks;
    bool all_pass = true;
    double max_violation = 0.0;

    void add(const std::string &name, double violation, double tol);
};

struct SolveOutcome {
    std::vector<double> se_per_ue;        // bit/s/Hz
    double sum_se = 0.0;
    std::vector<double> fronthaul_per_ap; // bit/s/Hz
    FeasibilityReport feasibility;
    int iterations = 0;
    double wall_time_s = 0.0;
    std::vector<double> objective_trace;
    bool converged = false;
    std::string diagnostics;
};

}  // namespace cfmimo
