#include "cfmimo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cfmimo/baselines.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/se_model.hpp"

namespace cfmimo {

namespace {
using nlohmann::json;

std::string format_double(double v, const char *fmt = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}
}  // namespace

std::string solver_name(Solver s) {
    switch (s) {
        case Solver::SCA: return "SCA";
        case Solver::APG: return "APG";
        case Solver::FULL: return "FULL";
        case Solver::HEU: return "HEU";
    }
    return "?";
}

Solver parse_solver(const std::string &name) {
    if (name == "SCA") return Solver::SCA;
    if (name == "APG") return Solver::APG;
    if (name == "FULL") return Solver::FULL;
    if (name == "HEU") return Solver::HEU;
    throw std::invalid_argument("unknown solver '" + name + "' (expected SCA, APG, FULL or HEU)");
}

void ExperimentSpec::validate() const {
    network.validate();
    if (num_realizations < 1) throw std::invalid_argument("num_realizations must be >= 1");
    if (solvers.empty()) throw std::invalid_argument("at least one solver must be selected");
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
}

std::vector<std::string> preset_names() {
    return {"small-25x7", "small-36x5", "large-150x40", "large-300x40"};
}

ExperimentSpec preset_spec(const std::string &name) {
    ExperimentSpec spec;
    spec.scenario = name;
    if (name == "small-25x7") {
        spec.network = make_config(25, 7, 5);
    } else if (name == "small-36x5") {
        spec.network = make_config(36, 5, 3);
    } else if (name == "large-150x40") {
        spec.network = make_config(150, 40, 15);
    } else if (name == "large-300x40") {
        spec.network = make_config(300, 40, 15);
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return spec;
}

namespace {

void apply_network_overrides(ExperimentSpec &spec, const json &net) {
    NetworkConfig &cfg = spec.network;
    bool power_fields_touched = false;
    for (auto it = net.begin(); it != net.end(); ++it) {
        const std::string &key = it.key();
        try {
            if (key == "num_aps") cfg.num_aps = it.value().get<int>();
            else if (key == "num_ues") cfg.num_ues = it.value().get<int>();
            else if (key == "antennas_per_ap") cfg.antennas_per_ap = it.value().get<int>();
            else if (key == "coherence_len") cfg.coherence_len = it.value().get<int>();
            else if (key == "pilot_len") cfg.pilot_len = it.value().get<int>();
            else if (key == "dl_power_w") { spec.dl_power_w = it.value().get<double>(); power_fields_touched = true; }
            else if (key == "pilot_power_w") { spec.pilot_power_w = it.value().get<double>(); power_fields_touched = true; }
            else if (key == "qos_se") cfg.qos_se = it.value().get<double>();
            else if (key == "fronthaul_cap") cfg.fronthaul_cap = it.value().get<double>();
            else if (key == "max_served") cfg.max_served = it.value().get<int>();
            else if (key == "area_side") cfg.area_side = it.value().get<double>();
            else if (key == "min_ap_separation") cfg.min_ap_separation = it.value().get<double>();
            else if (key == "strong_set_fraction") cfg.strong_set_fraction = it.value().get<double>();
            else if (key == "noise_figure_db") { cfg.noise_figure_db = it.value().get<double>(); power_fields_touched = true; }
            else if (key == "bandwidth_hz") { cfg.bandwidth_hz = it.value().get<double>(); power_fields_touched = true; }
            else if (key == "rng_seed") cfg.rng_seed = it.value().get<std::uint64_t>();
            else throw std::invalid_argument("unknown network field '" + key + "'");
        } catch (const json::exception &e) {
            throw std::invalid_argument("network field '" + key + "': " + e.what());
        }
    }
    if (!net.contains("pilot_len") && net.contains("num_ues")) cfg.pilot_len = cfg.num_ues;
    if (power_fields_touched || net.contains("num_aps") || net.contains("num_ues")) {
        double noise = noise_power_w(cfg.bandwidth_hz, cfg.noise_figure_db);
        cfg.dl_power = spec.dl_power_w / noise;
        cfg.pilot_power = spec.pilot_power_w / noise;
    }
}

void apply_apg_overrides(ApgParams &p, const json &obj) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string &key = it.key();
        if (key == "mu") {
            auto v = it.value().get<std::vector<double>>();
            if (v.size() != 4) throw std::invalid_argument("apg.mu must have 4 entries");
            std::copy(v.begin(), v.end(), p.mu);
        } else if (key == "chi_init") p.chi_init = it.value().get<double>();
        else if (key == "delta") p.delta = it.value().get<double>();
        else if (key == "alpha_vbar") p.alpha_vbar = it.value().get<double>();
        else if (key == "alpha_v") p.alpha_v = it.value().get<double>();
        else if (key == "zeta") p.zeta = it.value().get<double>();
        else if (key == "eps") p.eps = it.value().get<double>();
        else if (key == "eps_inner") p.eps_inner = it.value().get<double>();
        else if (key == "upsilon") p.upsilon = it.value().get<double>();
        else if (key == "max_inner") p.max_inner = it.value().get<int>();
        else if (key == "max_outer") p.max_outer = it.value().get<int>();
        else if (key == "random_init") p.random_init = it.value().get<bool>();
        else throw std::invalid_argument("unknown apg field '" + key + "'");
    }
}

void apply_sca_overrides(ScaParams &p, const json &obj) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string &key = it.key();
        if (key == "lambda") p.lambda = it.value().get<double>();
        else if (key == "tol") p.tol = it.value().get<double>();
        else if (key == "max_iters") p.max_iters = it.value().get<int>();
        else if (key == "subproblem_tol") p.subproblem_tol = it.value().get<double>();
        else if (key == "integrality_norm") p.integrality_norm = it.value().get<double>();
        else throw std::invalid_argument("unknown sca field '" + key + "'");
    }
}

}  // namespace

ExperimentSpec load_spec_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open spec file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception &e) {
        throw std::invalid_argument("spec file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("spec file must contain a JSON object");

    ExperimentSpec spec;
    if (doc.contains("scenario")) {
        spec = preset_spec(doc["scenario"].get<std::string>());
    } else {
        spec.network = make_config(25, 7, 5);
    }
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string &key = it.key();
        if (key == "scenario") continue;
        else if (key == "network") apply_network_overrides(spec, it.value());
        else if (key == "solvers") {
            spec.solvers.clear();
            for (const auto &s : it.value()) spec.solvers.push_back(parse_solver(s.get<std::string>()));
        } else if (key == "num_realizations") spec.num_realizations = it.value().get<int>();
        else if (key == "parallelism") spec.parallelism = it.value().get<int>();
        else if (key == "output_dir") spec.output_dir = it.value().get<std::string>();
        else if (key == "apg") apply_apg_overrides(spec.apg, it.value());
        else if (key == "sca") apply_sca_overrides(spec.sca, it.value());
        else throw std::invalid_argument("unknown spec field '" + key + "'");
    }
    spec.validate();
    return spec;
}

namespace {

RealizationRecord run_one(Solver solver, const Realization &r, const ExperimentSpec &spec) {
    RealizationRecord rec;
    rec.solver = solver;
    const NetworkConfig &cfg = spec.network;
    try {
        switch (solver) {
            case Solver::SCA: {
                ScaResult s = sca_solve(r, cfg, spec.sca);
                rec.se = s.outcome.se_per_ue;
                rec.feasible = s.outcome.feasibility.all_pass;
                rec.max_violation = s.outcome.feasibility.max_violation;
                rec.iterations = s.outcome.iterations;
                rec.converged = s.outcome.converged;
                rec.wall_time_s = s.outcome.wall_time_s;
                break;
            }
            case Solver::APG: {
                ApgResult a = apg_solve(r, cfg, spec.apg);
                rec.se = a.outcome.se_per_ue;
                rec.feasible = a.outcome.feasibility.all_pass;
                rec.max_violation = a.outcome.feasibility.max_violation;
                rec.iterations = a.outcome.iterations;
                rec.converged = a.outcome.converged;
                rec.wall_time_s = a.outcome.wall_time_s;
                break;
            }
            case Solver::FULL: {
                AssocVars assoc = full_associate(cfg);
                PowerOptResult p = optimize_power_fixed_assoc(assoc, r, cfg, spec.apg);
                rec.se = p.outcome.se_per_ue;
                FeasibilityReport rep = check_feasibility({p.theta}, assoc, r, cfg, {},
                                                          /*exempt_association=*/true);
                rec.feasible = rep.all_pass;
                rec.max_violation = rep.max_violation;
                rec.iterations = p.outcome.iterations;
                rec.converged = p.outcome.converged;
                rec.wall_time_s = p.outcome.wall_time_s;
                break;
            }
            case Solver::HEU: {
                AssocVars assoc = heu_associate(r, cfg);
                PowerOptResult p = optimize_power_fixed_assoc(assoc, r, cfg, spec.apg);
                rec.sum_se_uncapped =
                    std::accumulate(p.outcome.se_per_ue.begin(), p.outcome.se_per_ue.end(), 0.0);
                rec.se = cap_fronthaul(p.outcome.se_per_ue, assoc, cfg);
                FeasibilityReport rep = check_feasibility({p.theta}, assoc, r, cfg);
                // Capping is a reporting-rate reduction: re-evaluate the SE
                // constraints on the capped values.
                auto loads = fronthaul_load(assoc, rec.se);
                double fh_violation = 0.0;
                for (double l : loads) fh_violation = std::max(fh_violation, l - cfg.fronthaul_cap);
                double qos_violation = 0.0;
                for (double s : rec.se) qos_violation = std::max(qos_violation, cfg.qos_se - s);
                FeasibilityReport adjusted;
                for (auto &c : rep.checks) {
                    if (c.name == "fronthaul") {
                        adjusted.add(c.name, fh_violation, 1e-4);
                    } else if (c.name == "qos") {
                        adjusted.add(c.name, qos_violation, 1e-4);
                    } else {
                        adjusted.checks.push_back(c);
                        adjusted.all_pass = adjusted.all_pass && c.pass;
                        adjusted.max_violation = std::max(adjusted.max_violation, c.worst_violation);
                    }
                }
                rec.feasible = adjusted.all_pass;
                rec.max_violation = adjusted.max_violation;
                rec.iterations = p.outcome.iterations;
                rec.converged = p.outcome.converged;
                rec.wall_time_s = p.outcome.wall_time_s;
                break;
            }
        }
        rec.sum_se = std::accumulate(rec.se.begin(), rec.se.end(), 0.0);
        if (solver != Solver::HEU) rec.sum_se_uncapped = rec.sum_se;
    } catch (const std::exception &e) {
        rec.solver_error = true;
        rec.error = e.what();
        rec.se.assign(cfg.num_ues, 0.0);
        rec.sum_se = rec.sum_se_uncapped = 0.0;
        rec.feasible = false;
    }
    return rec;
}

}  // namespace

ExperimentResult run_monte_carlo(const ExperimentSpec &spec) {
    spec.validate();
    const int R = spec.num_realizations;

    std::vector<Solver> solvers = spec.solvers;
    std::sort(solvers.begin(), solvers.end(),
              [](Solver a, Solver b) { return solver_name(a) < solver_name(b); });

    std::vector<std::vector<RealizationRecord>> rows(R);
#pragma omp parallel for schedule(dynamic) num_threads(spec.parallelism)
    for (int i = 0; i < R; ++i) {
        std::uint64_t seed = spec.network.rng_seed ^ static_cast<std::uint64_t>(i);
        std::vector<RealizationRecord> local;
        try {
            Realization r = make_realization(spec.network, seed);
            for (Solver s : solvers) {
                RealizationRecord rec = run_one(s, r, spec);
                rec.realization = i;
                local.push_back(std::move(rec));
            }
        } catch (const std::exception &e) {
            for (Solver s : solvers) {
                RealizationRecord rec;
                rec.realization = i;
                rec.solver = s;
                rec.solver_error = true;
                rec.error = e.what();
                rec.se.assign(spec.network.num_ues, 0.0);
                local.push_back(std::move(rec));
            }
        }
        rows[i] = std::move(local);
    }

    ExperimentResult result;
    for (auto &bucket : rows)
        for (auto &rec : bucket) result.records.push_back(std::move(rec));
    return result;
}

RowCounts expected_row_counts(const ExperimentSpec &spec) {
    RowCounts c;
    c.summary_rows = static_cast<long>(spec.num_realizations) * spec.solvers.size();
    c.per_ue_rows = c.summary_rows * spec.network.num_ues;
    return c;
}

std::vector<double> ExperimentResult::sum_se_values(Solver s) const {
    std::vector<double> v;
    for (const auto &r : records)
        if (r.solver == s && !r.solver_error) v.push_back(r.sum_se);
    return v;
}

std::vector<double> ExperimentResult::wall_times(Solver s) const {
    std::vector<double> v;
    for (const auto &r : records)
        if (r.solver == s && !r.solver_error) v.push_back(r.wall_time_s);
    return v;
}

void write_results(const ExperimentResult &result, const ExperimentSpec &spec, bool header_only) {
    namespace fs = std::filesystem;
    fs::create_directories(spec.output_dir);

    std::ofstream per_ue(fs::path(spec.output_dir) / "per_ue.csv");
    if (!per_ue) throw std::runtime_error("cannot write to output_dir '" + spec.output_dir + "'");
    per_ue << "realization,solver,ue,se_bits_hz\n";

    std::ofstream summary(fs::path(spec.output_dir) / "summary.csv");
    summary << "realization,solver,sum_se_bits_hz,sum_se_uncapped_bits_hz,feasible,max_violation,"
               "iterations,converged,wall_time_s,error\n";

    if (!header_only) {
        for (const auto &r : result.records) {
            for (size_t k = 0; k < r.se.size(); ++k) {
                per_ue << r.realization << ',' << solver_name(r.solver) << ',' << k << ','
                       << format_double(r.se[k]) << '\n';
            }
            summary << r.realization << ',' << solver_name(r.solver) << ','
                    << format_double(r.sum_se) << ',' << format_double(r.sum_se_uncapped) << ','
                    << (r.feasible ? 1 : 0) << ',' << format_double(r.max_violation) << ','
                    << r.iterations << ',' << (r.converged ? 1 : 0) << ','
                    << format_double(r.wall_time_s, "%.6f") << ','
                    << (r.solver_error ? r.error : "") << '\n';
        }
    }

    std::vector<Solver> solvers = spec.solvers;
    std::sort(solvers.begin(), solvers.end(),
              [](Solver a, Solver b) { return solver_name(a) < solver_name(b); });
    for (Solver s : solvers) {
        std::ofstream cdf(fs::path(spec.output_dir) / ("cdf_sum_se_" + solver_name(s) + ".csv"));
        cdf << "sum_se_bits_hz,probability\n";
        if (header_only) continue;
        for (auto &[v, p] : emit_cdf(result.sum_se_values(s))) {
            cdf << format_double(v) << ',' << format_double(p) << '\n';
        }
    }
}

std::vector<std::pair<double, double>> emit_cdf(const std::vector<double> &values) {
    if (values.empty()) throw std::invalid_argument("emit_cdf: empty input");
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        pairs.emplace_back(v[i], static_cast<double>(i + 1) / v.size());
    }
    return pairs;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_from_cdf(const std::vector<std::pair<double, double>> &pairs) {
    if (pairs.empty()) throw std::invalid_argument("median_from_cdf: empty input");
    const size_t n = pairs.size();
    if (n == 1) return pairs[0].first;
    // Midpoint plotting positions p_i = (i + 0.5)/n, interpolated at 1/2.
    auto pos = [&](size_t i) { return (static_cast<double>(i) + 0.5) / n; };
    if (pos(0) >= 0.5) return pairs[0].first;
    for (size_t i = 1; i < n; ++i) {
        if (pos(i) >= 0.5) {
            double t = (0.5 - pos(i - 1)) / (pos(i) - pos(i - 1));
            return pairs[i - 1].first + t * (pairs[i].first - pairs[i - 1].first);
        }
    }
    return pairs[n - 1].first;
}

}  // namespace cfmimo
