#pragma once

#include <optional>
#include <vector>

#include "cfmimo/ipm.hpp"
#include "cfmimo/subproblem.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

struct ScaParams {
    double lambda = 100.0;          // integrality penalty weight
    double tol = 1e-3;              // relative surrogate-objective change
    int max_iters = 50;
    double subproblem_tol = 1e-7;   // KKT residual target of the inner solver
    double integrality_norm = 5e-5; // accepted Q(a)/(MK) at termination
};

// Expansion point plus slack values carried between convex subproblems.
struct ScaIterate {
    Mat a;                       // relaxed association, in [0,1]
    Mat theta;
    std::vector<double> t;       // SE lower-bound slacks
    std::vector<double> t_hat;   // SE upper-bound slacks
    std::vector<double> w_hat;   // interference slacks
    double lambda = 100.0;
    int iter = 0;
    double objective = 0.0;      // surrogate objective at this iterate
};

// Concave minorant of prelog*log2(1 + u^2/w) expanded at (u0, w0); tight at
// the expansion point and a global lower bound for w > 0.
double surrogate_se_lower(double u, double w, double u0, double w0, double prelog);
// Convex majorant of the same function, valid for w >= 1.
double surrogate_se_upper(double u, double w, double u0, double w0, double prelog);

// Spec-shaped wrappers evaluating the surrogates for UE k at a full power
// matrix and a given interference-slack value.
double surrogate_se_lower(const Mat &theta, double w_hat, double u0, double w0,
                          const Realization &r, const NetworkConfig &cfg, int k);
double surrogate_se_upper(const Mat &theta, double w_hat, double u0, double w0,
                          const Realization &r, const NetworkConfig &cfg, int k);

// Variable layout of the convex subproblem.
struct ScaLayout {
    int M = 0, K = 0;
    int theta(int m, int k) const { return m * K + k; }
    int a(int m, int k) const { return M * K + m * K + k; }
    int t(int k) const { return 2 * M * K + k; }
    int t_hat(int k) const { return 2 * M * K + K + k; }
    int w_hat(int k) const { return 2 * M * K + 2 * K + k; }
    int num_vars() const { return 2 * M * K + 3 * K; }
};

struct BuiltSubproblem {
    ConvexSubproblem prob;        // scaled variables
    ScaLayout layout;
    std::vector<double> x0;       // scaled start point (the expansion point)
    std::vector<double> w_scale;  // per-UE scale of the interference slack
    std::vector<double> u0;       // expansion signal amplitudes
    std::vector<double> w0;       // expansion interference values
};

// Assembles the convex inner approximation around the given iterate: the
// linearized integrality penalty in the objective, both SE surrogates, the
// linearized interference floor, the bilinear fronthaul majorant, and all
// affine coupling constraints.
BuiltSubproblem convexified_constraints(const ScaIterate &it, const Realization &r,
                                        const NetworkConfig &cfg);

struct SubproblemSolution {
    std::vector<double> x;  // unscaled variables
    double objective = 0.0;
    ipm::Result ipm;
};

// Solves the convex subproblem to the requested KKT tolerance. Throws
// std::runtime_error with constraint diagnostics when the inner solver fails
// (subproblems are feasible by construction, so failure signals a bug).
SubproblemSolution solve_subproblem(const BuiltSubproblem &bp, double tol);

// Feasible warm start: heuristic association, uniform power scaled until the
// fronthaul loads fit, greedy power bumps for UEs below the QoS floor, and
// slacks initialized tight.
ScaIterate make_sca_init(const Realization &r, const NetworkConfig &cfg, double lambda);

struct ScaResult {
    SolveOutcome outcome;
    Mat assoc;
    Mat theta;
    ScaIterate final_iterate;
};

ScaResult sca_solve(const Realization &r, const NetworkConfig &cfg, const ScaParams &params = {},
                    std::optional<ScaIterate> init = std::nullopt);

}  // namespace cfmimo
