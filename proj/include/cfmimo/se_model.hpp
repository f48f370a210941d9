#pragma once

#include <vector>

#include "cfmimo/kernels.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

struct SeTerms {
    std::vector<double> signal;        // squared coherent sum per UE
    std::vector<double> interference;  // interference-plus-noise per UE (>= 1)
};

// Closed-form SINR terms for a power allocation on one realization.
SeTerms signal_and_interference(const PowerAlloc &theta, const Realization &r, const NetworkConfig &cfg);

// Per-UE downlink spectral efficiency, bit/s/Hz.
std::vector<double> se_per_ue(const PowerAlloc &theta, const Realization &r, const NetworkConfig &cfg);

// Per-AP fronthaul load sum_k a(m,k) * se[k]. `a` is interpreted as given
// (binary association or squared relaxation, caller's choice).
std::vector<double> fronthaul_load(const AssocVars &assoc, const std::vector<double> &se);

struct FeasibilityTolerances {
    double algebraic = 1e-6;  // power, bounds, association coupling
    double se = 1e-4;         // QoS and fronthaul, bit/s/Hz
};

// Evaluates every constraint of the joint problem and reports the worst
// violation per constraint family. Reporting only; nothing is enforced.
// With exempt_association=true the fronthaul, serving-cap and coverage checks
// are skipped (full-association baseline is defined without them).
FeasibilityReport check_feasibility(const PowerAlloc &theta, const AssocVars &assoc,
                                    const Realization &r, const NetworkConfig &cfg,
                                    const FeasibilityTolerances &tol = {},
                                    bool exempt_association = false);

}  // namespace cfmimo
