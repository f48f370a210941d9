#include "cfmimo/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {
constexpr int kMaxPlacementRounds = 10000;

double wrap_delta(double d, double side) {
    d = std::fabs(d);
    return std::min(d, side - d);
}
}  // namespace

double torus_distance(const Point &a, const Point &b, double side) {
    double dx = wrap_delta(a.x - b.x, side);
    double dy = wrap_delta(a.y - b.y, side);
    return std::sqrt(dx * dx + dy * dy);
}

double ap_ue_distance(const Point &ap, const Point &ue, double side, double height) {
    double dx = wrap_delta(ap.x - ue.x, side);
    double dy = wrap_delta(ap.y - ue.y, side);
    return std::sqrt(dx * dx + dy * dy + height * height);
}

Geometry build_geometry(const NetworkConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    auto eng = make_engine(derive_seed(seed, 0));
    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);

    Geometry g;
    g.ap_pos.reserve(cfg.num_aps);
    for (int m = 0; m < cfg.num_aps; ++m) {
        bool placed = false;
        for (int round = 0; round < kMaxPlacementRounds && !placed; ++round) {
            Point cand{coord(eng), coord(eng)};
            placed = true;
            for (const Point &p : g.ap_pos) {
                if (torus_distance(cand, p, cfg.area_side) < cfg.min_ap_separation) {
                    placed = false;
                    break;
                }
            }
            if (placed) g.ap_pos.push_back(cand);
        }
        if (!placed) {
            throw std::runtime_error(
                "build_geometry: could not place AP " + std::to_string(m) + " after " +
                std::to_string(kMaxPlacementRounds) +
                " rejection rounds; the configuration is too dense for the requested "
                "minimum AP separation");
        }
    }

    g.ue_pos.reserve(cfg.num_ues);
    for (int k = 0; k < cfg.num_ues; ++k) {
        g.ue_pos.push_back({coord(eng), coord(eng)});
    }
    return g;
}

}  // namespace cfmimo
