#pragma once

#include <string>
#include <vector>

namespace cfmimo {

struct SparseVec {
    std::vector<std::pair<int, double>> entries;  // (index, value), indices strictly increasing

    void add(int idx, double val) { entries.emplace_back(idx, val); }
    double dot(const double *x) const {
        double acc = 0.0;
        for (auto &[i, v] : entries) acc += v * x[i];
        return acc;
    }
};

// One smooth convex inequality g(x) <= 0 in the canonical form
//   g(x) = constant + lin.x + sum_i d_i x_i^2 + sum_r w_r (u_r.x)^2 - sum_j c_j ln x_j
// with d_i, w_r, c_j >= 0, which covers every constraint of the convexified
// subproblem: affine rows, per-AP power balls, convex-quadratic surrogate
// rows and the log term of the SE upper-bound surrogate.
struct ConvexConstraint {
    std::string name;
    double constant = 0.0;
    SparseVec lin;
    std::vector<std::pair<int, double>> quad_diag;
    struct Rank1 {
        double weight = 0.0;
        SparseVec dir;
    };
    std::vector<Rank1> quad_rank1;
    std::vector<std::pair<int, double>> neg_log;

    double eval(const double *x) const;
    // Accumulates the gradient into a dense buffer restricted to the
    // constraint's support.
    void add_gradient(const double *x, double scale, double *out) const;
    // Fixed sparsity pattern of the gradient (sorted, unique).
    std::vector<int> support() const;
};

// Linear objective plus convex constraint list: minimize c.x subject to
// g_i(x) <= 0. Variables are expected pre-scaled to O(1) by the builder.
struct ConvexSubproblem {
    int num_vars = 0;
    std::vector<double> objective;    // c
    double objective_constant = 0.0;
    std::vector<ConvexConstraint> constraints;

    double objective_value(const double *x) const;
    // Throws std::logic_error if any curvature weight is negative.
    void check_convexity() const;
};

}  // namespace cfmimo
