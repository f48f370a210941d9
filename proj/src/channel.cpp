#include "cfmimo/channel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "cfmimo/geometry.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {
constexpr double kBoltzmannJPerK = 1.381e-23;
constexpr double kNoiseTemperatureK = 290.0;
}  // namespace

void NetworkConfig::validate() const {
    auto fail = [](const std::string &msg) { throw std::invalid_argument("NetworkConfig: " + msg); };
    if (num_aps < 1) fail("num_aps must be >= 1");
    if (num_ues < 1) fail("num_ues must be >= 1");
    if (antennas_per_ap < 1) fail("antennas_per_ap must be >= 1");
    if (pilot_len < num_ues) fail("pilot_len must be >= num_ues for orthogonal pilots");
    if (pilot_len >= coherence_len) fail("pilot_len must be < coherence_len");
    if (pilot_power <= 0.0 || dl_power <= 0.0) fail("transmit powers must be positive");
    if (max_served < 1 || max_served > num_ues) fail("max_served must be in [1, num_ues]");
    if (area_side <= 0.0) fail("area_side must be positive");
    if (min_ap_separation < 0.0) fail("min_ap_separation must be nonnegative");
    if (strong_set_fraction <= 0.0 || strong_set_fraction > 100.0)
        fail("strong_set_fraction must be in (0, 100]");
    if (qos_se < 0.0) fail("qos_se must be nonnegative");
    if (fronthaul_cap <= 0.0) fail("fronthaul_cap must be positive");
}

double noise_power_w(double bandwidth_hz, double noise_figure_db) {
    return bandwidth_hz * kBoltzmannJPerK * kNoiseTemperatureK * std::pow(10.0, noise_figure_db / 10.0);
}

double noise_power_dbm(double bandwidth_hz, double noise_figure_db) {
    return 10.0 * std::log10(noise_power_w(bandwidth_hz, noise_figure_db) / 1e-3);
}

NetworkConfig make_config(int num_aps, int num_ues, int max_served,
                          double dl_power_w, double pilot_power_w) {
    NetworkConfig cfg;
    cfg.num_aps = num_aps;
    cfg.num_ues = num_ues;
    cfg.max_served = max_served;
    cfg.pilot_len = num_ues;
    double noise = noise_power_w(cfg.bandwidth_hz, cfg.noise_figure_db);
    cfg.dl_power = dl_power_w / noise;
    cfg.pilot_power = pilot_power_w / noise;
    cfg.validate();
    return cfg;
}

double path_gain_linear(double distance_m) {
    double d = std::max(distance_m, kMinDistanceM);
    double gain_db = kPathLossOffsetDb - kPathLossSlopeDb * std::log10(d);
    return std::pow(10.0, gain_db / 10.0);
}

Mat large_scale_fading(const std::vector<Point> &ap_pos, const std::vector<Point> &ue_pos,
                       const NetworkConfig &cfg, std::uint64_t seed) {
    const int M = static_cast<int>(ap_pos.size());
    const int K = static_cast<int>(ue_pos.size());
    auto eng = make_engine(derive_seed(seed, 1));
    std::normal_distribution<double> shadow(0.0, kShadowingStdDb);

    Mat beta(M, K);
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            double d = ap_ue_distance(ap_pos[m], ue_pos[k], cfg.area_side, kApUeHeightM);
            beta(m, k) = path_gain_linear(d) * std::pow(10.0, shadow(eng) / 10.0);
        }
    }
    return beta;
}

double channel_estimate_variance(double beta, double pilot_power, int pilot_len) {
    if (beta <= 0.0) return 0.0;
    double energy = pilot_len * pilot_power * beta;
    return energy * beta / (energy + 1.0);
}

Mat estimate_variance_matrix(const Mat &beta, const NetworkConfig &cfg) {
    Mat s(beta.rows, beta.cols);
    for (size_t i = 0; i < beta.size(); ++i) {
        s.data[i] = channel_estimate_variance(beta.data[i], cfg.pilot_power, cfg.pilot_len);
    }
    return s;
}

StrongSets select_strong_sets(const Mat &beta, const NetworkConfig &cfg) {
    const int M = beta.rows;
    const int K = beta.cols;
    const int max_set = std::max(0, cfg.antennas_per_ap - 1);

    StrongSets out;
    out.sets.resize(M);
    out.delta.assign(static_cast<size_t>(M) * K, 0);

    std::vector<int> order(K);
    for (int m = 0; m < M; ++m) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return beta(m, a) > beta(m, b); });
        double total = 0.0;
        for (int k = 0; k < K; ++k) total += beta(m, k);

        double acc = 0.0;
        std::vector<int> set;
        for (int k : order) {
            if (total > 0.0 && acc / total >= cfg.strong_set_fraction / 100.0) break;
            set.push_back(k);
            acc += beta(m, k);
        }
        if (static_cast<int>(set.size()) > max_set) set.resize(max_set);
        for (int k : set) out.delta[static_cast<size_t>(m) * K + k] = 1;
        out.sets[m] = std::move(set);
    }
    return out;
}

Realization make_realization(const NetworkConfig &cfg, std::uint64_t seed) {
    Geometry g = build_geometry(cfg, seed);
    Realization r;
    r.ap_pos = std::move(g.ap_pos);
    r.ue_pos = std::move(g.ue_pos);
    r.beta = large_scale_fading(r.ap_pos, r.ue_pos, cfg, seed);
    r.sigma_sq = estimate_variance_matrix(r.beta, cfg);
    StrongSets ss = select_strong_sets(r.beta, cfg);
    r.strong_sets = std::move(ss.sets);
    r.delta = std::move(ss.delta);
    r.seed = seed;
    return r;
}

MmseSimulation simulate_mmse_estimate(double beta, double pilot_power, int pilot_len,
                                      int num_samples, std::uint64_t seed, int antennas) {
    if (num_samples < 1) throw std::invalid_argument("simulate_mmse_estimate: num_samples must be >= 1");
    auto eng = make_engine(derive_seed(seed, 2));
    std::normal_distribution<double> unit(0.0, 1.0);

    // Orthogonal pilots reduce the projected observation for one UE to
    //   y = sqrt(rho_p) * tau_p * g + n',   n' ~ CN(0, tau_p I),
    // and the MMSE estimate is g_hat = c * y with the scalar below.
    const double c = std::sqrt(pilot_power) * beta / (pilot_len * pilot_power * beta + 1.0);
    const double g_std = std::sqrt(beta / 2.0);
    const double n_std = std::sqrt(pilot_len / 2.0);
    const double pilot_amp = std::sqrt(pilot_power) * pilot_len;

    double est_acc = 0.0;
    double err_acc = 0.0;
    for (int s = 0; s < num_samples; ++s) {
        for (int n = 0; n < antennas; ++n) {
            std::complex<double> g(g_std * unit(eng), g_std * unit(eng));
            std::complex<double> noise(n_std * unit(eng), n_std * unit(eng));
            std::complex<double> est = c * (pilot_amp * g + noise);
            est_acc += std::norm(est);
            err_acc += std::norm(est - g);
        }
    }
    double count = static_cast<double>(num_samples) * antennas;
    return {est_acc / count, err_acc / count};
}

}  // namespace cfmimo
