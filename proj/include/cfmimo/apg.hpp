#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cfmimo/kernels.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

struct ApgParams {
    double mu[4] = {50.0, 1e3, 5e4, 10.0};  // penalty weights
    double chi_init = 1.0;                  // initial multiplier
    double delta = 2.0;                     // multiplier growth factor
    double alpha_vbar = 1e-4;               // step size at the extrapolated point
    double alpha_v = 1e-4;                  // step size of the correction step
    double zeta = 0.1;                      // nonmonotone averaging weight, in [0, 1)
    double eps = 1e-3;                      // normalized-penalty convergence threshold
    double eps_inner = 1e-6;                // relative objective-change stop for the inner loop
    double upsilon = 1e-2;                  // listed initialization constant; unused downstream
    int max_inner = 10000;
    int max_outer = 30;
    bool random_init = false;               // structured warm start by default
};

// Iterate of the nonmonotone accelerated projected-gradient loop over the
// stacked variable v = (theta, z).
struct ApgState {
    Mat theta, z;          // current iterate v
    Mat theta_prev, z_prev;
    Mat theta_tilde, z_tilde;  // last accepted projected-extrapolation point
    double q_prev = 0.0;
    double q_cur = 1.0;
    double b = 1.0;        // nonmonotone averaging normalizer
    double c = 0.0;        // weighted average of past objective values
    double f_cur = 0.0;    // objective at the current iterate
    double chi = 1.0;
    int iter = 0;
};

// Penalty terms of the relaxed problem at (theta, z).
kernels::ObjectiveTerms penalty_terms(const Mat &theta, const Mat &z, const Realization &r,
                                      const NetworkConfig &cfg, const ApgParams &p, double chi);

// Analytic gradient of the penalized objective, stacked [dtheta, dz].
std::vector<double> apg_gradient(const Mat &theta, const Mat &z, const Realization &r,
                                 const NetworkConfig &cfg, const ApgParams &p, double chi);

// Projection of one AP row onto the intersection of the unit ball and the
// nonnegative orthant (exact closed form: clamp, then radial scaling).
void project_theta_row(std::span<double> row);

// Approximate projection onto {z >= 0, ||z||^2 <= k_hat, z <= 1}: projection
// onto the ball-orthant set composed with the box clamp. This is the fast
// composed form, not the exact projection onto the intersection.
void project_z_row(std::span<double> row, double k_hat);

struct InnerResult {
    int iterations = 0;
    bool hit_cap = false;
};

// Runs the nonmonotone APG loop at fixed multiplier state.chi until the
// 10-step relative objective change or the one-step relative change of the
// unpenalized objective falls below eps_inner, or max_inner is reached.
// Throws std::runtime_error if the objective turns non-finite.
InnerResult apg_inner(ApgState &state, const kernels::SeWorkspace &ws, const NetworkConfig &cfg,
                      const ApgParams &p, const std::vector<std::uint8_t> *frozen_theta = nullptr,
                      bool optimize_z = true);

struct ApgResult {
    SolveOutcome outcome;
    Mat theta;
    Mat z;       // final continuous association variables
    Mat assoc;   // rounded binary association
};

// Full penalty loop: grows chi by delta until all normalized penalties fall
// below eps, rounds z to a binary association (threshold z^2 >= 0.5 with
// coverage/capacity repair), pins and re-projects theta, and scores the
// rounded solution with the closed-form SE model.
ApgResult apg_solve(const Realization &r, const NetworkConfig &cfg, const ApgParams &p,
                    std::optional<std::pair<Mat, Mat>> init = std::nullopt);

}  // namespace cfmimo
