#include "cfmimo/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfmimo {

double ConvexConstraint::eval(const double *x) const {
    double g = constant + lin.dot(x);
    for (auto &[i, d] : quad_diag) g += d * x[i] * x[i];
    for (auto &r : quad_rank1) {
        double u = r.dir.dot(x);
        g += r.weight * u * u;
    }
    for (auto &[i, c] : neg_log) g -= c * std::log(x[i]);
    return g;
}

void ConvexConstraint::add_gradient(const double *x, double scale, double *out) const {
    for (auto &[i, v] : lin.entries) out[i] += scale * v;
    for (auto &[i, d] : quad_diag) out[i] += scale * 2.0 * d * x[i];
    for (auto &r : quad_rank1) {
        double u = r.dir.dot(x);
        for (auto &[i, v] : r.dir.entries) out[i] += scale * 2.0 * r.weight * u * v;
    }
    for (auto &[i, c] : neg_log) out[i] -= scale * c / x[i];
}

std::vector<int> ConvexConstraint::support() const {
    std::vector<int> idx;
    for (auto &[i, v] : lin.entries) idx.push_back(i);
    for (auto &[i, d] : quad_diag) idx.push_back(i);
    for (auto &r : quad_rank1)
        for (auto &[i, v] : r.dir.entries) idx.push_back(i);
    for (auto &[i, c] : neg_log) idx.push_back(i);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

double ConvexSubproblem::objective_value(const double *x) const {
    double acc = objective_constant;
    for (int i = 0; i < num_vars; ++i) acc += objective[i] * x[i];
    return acc;
}

void ConvexSubproblem::check_convexity() const {
    for (const auto &c : constraints) {
        for (auto &[i, d] : c.quad_diag)
            if (d < 0.0) throw std::logic_error("constraint " + c.name + ": negative diagonal curvature");
        for (auto &r : c.quad_rank1)
            if (r.weight < 0.0) throw std::logic_error("constraint " + c.name + ": negative rank-1 weight");
        for (auto &[i, w] : c.neg_log)
            if (w < 0.0) throw std::logic_error("constraint " + c.name + ": negative log coefficient");
    }
}

}  // namespace cfmimo
