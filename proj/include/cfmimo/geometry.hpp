#pragma once

#include <cstdint>
#include <vector>

#include "cfmimo/types.hpp"

namespace cfmimo {

// Distance on the wrap-around square of side `side` (torus metric).
double torus_distance(const Point &a, const Point &b, double side);

// 3-D AP-to-UE distance: torus metric in the plane plus a fixed height offset.
double ap_ue_distance(const Point &ap, const Point &ue, double side, double height);

struct Geometry {
    std::vector<Point> ap_pos;
    std::vector<Point> ue_pos;
};

// Draws AP positions by rejection sampling until every pairwise wrap-around
// distance respects cfg.min_ap_separation, then draws UE positions uniformly.
// Deterministic for a given seed. Throws std::runtime_error when an AP cannot
// be placed within the per-AP rejection budget (over-dense configuration).
Geometry build_geometry(const NetworkConfig &cfg, std::uint64_t seed);

}  // namespace cfmimo
