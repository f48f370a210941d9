#include "cfmimo/se_model.hpp"

#include <algorithm>
#include <cmath>

namespace cfmimo {

SeTerms signal_and_interference(const PowerAlloc &theta, const Realization &r, const NetworkConfig &cfg) {
    auto ws = kernels::make_workspace(r, cfg);
    auto amp = kernels::signal_amplitude(theta.theta, ws);
    SeTerms t;
    t.interference = kernels::interference(kernels::row_power(theta.theta), ws);
    t.signal.resize(amp.size());
    for (size_t k = 0; k < amp.size(); ++k) t.signal[k] = amp[k] * amp[k];
    return t;
}

std::vector<double> se_per_ue(const PowerAlloc &theta, const Realization &r, const NetworkConfig &cfg) {
    auto ws = kernels::make_workspace(r, cfg);
    return kernels::spectral_efficiency(theta.theta, ws);
}

std::vector<double> fronthaul_load(const AssocVars &assoc, const std::vector<double> &se) {
    std::vector<double> load(assoc.a.rows, 0.0);
    for (int m = 0; m < assoc.a.rows; ++m) {
        double acc = 0.0;
        for (int k = 0; k < assoc.a.cols; ++k) acc += assoc.a(m, k) * se[k];
        load[m] = acc;
    }
    return load;
}

void FeasibilityReport::add(const std::string &name, double violation, double tol) {
    ConstraintCheck c;
    c.name = name;
    c.worst_violation = violation;
    c.pass = violation <= tol;
    all_pass = all_pass && c.pass;
    max_violation = std::max(max_violation, violation);
    checks.push_back(std::move(c));
}

FeasibilityReport check_feasibility(const PowerAlloc &theta, const AssocVars &assoc,
                                    const Realization &r, const NetworkConfig &cfg,
                                    const FeasibilityTolerances &tol, bool exempt_association) {
    const int M = r.num_aps();
    const int K = r.num_ues();
    FeasibilityReport rep;

    double worst_neg = 0.0;
    for (double v : theta.theta.data) worst_neg = std::max(worst_neg, -v);
    rep.add("theta_nonneg", worst_neg, tol.algebraic);

    double worst_power = 0.0;
    for (int m = 0; m < M; ++m) {
        double p = 0.0;
        for (int k = 0; k < K; ++k) p += theta.theta(m, k) * theta.theta(m, k);
        worst_power = std::max(worst_power, p - 1.0);
    }
    rep.add("ap_power", worst_power, tol.algebraic);

    // a must be (near-)binary unless the caller is inspecting a relaxation.
    double worst_int = 0.0;
    double worst_range = 0.0;
    for (double v : assoc.a.data) {
        worst_range = std::max({worst_range, -v, v - 1.0});
        if (!assoc.relaxed) worst_int = std::max(worst_int, std::min(std::fabs(v), std::fabs(1.0 - v)));
    }
    rep.add("assoc_range", worst_range, tol.algebraic);
    if (!assoc.relaxed) rep.add("assoc_integrality", worst_int, tol.algebraic);

    double worst_couple = 0.0;
    for (size_t i = 0; i < theta.theta.size(); ++i) {
        double t2 = theta.theta.data[i] * theta.theta.data[i];
        worst_couple = std::max(worst_couple, t2 - assoc.a.data[i]);
    }
    rep.add("theta_le_assoc", worst_couple, tol.algebraic);

    auto se = se_per_ue(theta, r, cfg);
    double worst_qos = 0.0;
    for (int k = 0; k < K; ++k) worst_qos = std::max(worst_qos, cfg.qos_se - se[k]);
    rep.add("qos", worst_qos, tol.se);

    if (!exempt_association) {
        auto loads = fronthaul_load(assoc, se);
        double worst_fh = 0.0;
        for (double l : loads) worst_fh = std::max(worst_fh, l - cfg.fronthaul_cap);
        rep.add("fronthaul", worst_fh, tol.se);

        double worst_cap = 0.0;
        for (int m = 0; m < M; ++m) {
            double row = 0.0;
            for (int k = 0; k < K; ++k) row += assoc.a(m, k);
            worst_cap = std::max(worst_cap, row - cfg.max_served);
        }
        rep.add("max_served", worst_cap, tol.algebraic);

        double worst_cov = 0.0;
        for (int k = 0; k < K; ++k) {
            double col = 0.0;
            for (int m = 0; m < M; ++m) col += assoc.a(m, k);
            worst_cov = std::max(worst_cov, 1.0 - col);
        }
        rep.add("min_one_ap", worst_cov, tol.algebraic);
    }
    return rep;
}

}  // namespace cfmimo
