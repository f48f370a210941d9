#pragma once

#include <vector>

#include "cfmimo/apg.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

// Every AP serves every UE. The fronthaul, serving-cap and coverage
// constraints are exempted downstream for this scheme.
AssocVars full_associate(const NetworkConfig &cfg);

// Two-phase heuristic: first each UE (in index order) takes its strongest AP
// among APs not yet claimed in this phase, then each AP fills up to the
// serving cap with its strongest remaining UEs.
AssocVars heu_associate(const Realization &r, const NetworkConfig &cfg);

struct PowerOptResult {
    SolveOutcome outcome;
    Mat theta;
};

// Projected-gradient power control for a fixed binary association: gradient
// steps over theta only, QoS penalty active, theta pinned to zero on
// non-associated links. Association-side penalties are disabled, matching the
// definition of the full-association baseline.
PowerOptResult optimize_power_fixed_assoc(const AssocVars &assoc, const Realization &r,
                                          const NetworkConfig &cfg, const ApgParams &params);

// Scales all spectral efficiencies down so the largest per-AP fronthaul load
// meets the cap; identity when every load is already within the cap.
std::vector<double> cap_fronthaul(const std::vector<double> &se, const AssocVars &assoc,
                                  const NetworkConfig &cfg);

}  // namespace cfmimo
