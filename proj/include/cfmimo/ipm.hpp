#pragma once

#include <string>
#include <vector>

#include "cfmimo/subproblem.hpp"

namespace cfmimo::ipm {

struct Options {
    double tol = 1e-8;        // relative KKT residual target
    int max_iter = 120;
    double boundary_frac = 0.995;  // fraction-to-boundary for slacks and multipliers
};

struct Result {
    std::vector<double> x;
    std::vector<double> lambda;
    std::vector<double> slack;
    bool converged = false;
    int iterations = 0;
    double dual_residual = 0.0;    // ||c + J^T lambda||_inf, scaled
    double primal_residual = 0.0;  // ||g + s||_inf, scaled
    double complementarity = 0.0;  // total gap relative to the objective scale
    std::string message;
};

// Infeasible-start primal-dual interior-point method with a Mehrotra-style
// predictor-corrector. The Newton matrix is kept as a near-diagonal sparse
// core plus low-rank constraint terms and solved through the matrix
// inversion lemma, so the per-iteration cost stays close to linear in the
// variable count.
Result solve(const ConvexSubproblem &prob, const std::vector<double> &x0, const Options &opts = {});

}  // namespace cfmimo::ipm
