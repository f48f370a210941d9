#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfmimo/apg.hpp"
#include "cfmimo/sca.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

enum class Solver { SCA, APG, FULL, HEU };

std::string solver_name(Solver s);
Solver parse_solver(const std::string &name);  // throws std::invalid_argument

struct ExperimentSpec {
    std::string scenario = "custom";
    NetworkConfig network;
    double dl_power_w = 1.0;
    double pilot_power_w = 0.1;
    std::vector<Solver> solvers = {Solver::SCA, Solver::APG, Solver::FULL, Solver::HEU};
    int num_realizations = 1;
    int parallelism = 1;
    std::string output_dir = "out";
    ApgParams apg;
    ScaParams sca;

    void validate() const;  // throws std::invalid_argument
};

// Shipped desk-scale presets: small-25x7, small-36x5, large-150x40, large-300x40.
std::vector<std::string> preset_names();
ExperimentSpec preset_spec(const std::string &name);

// Parses a JSON experiment file; unknown keys and malformed values raise
// std::invalid_argument with a description of the offending field.
ExperimentSpec load_spec_file(const std::string &path);

struct RealizationRecord {
    int realization = 0;
    Solver solver = Solver::HEU;
    std::vector<double> se;        // reported per-UE SEs (fronthaul-capped for HEU)
    double sum_se = 0.0;
    double sum_se_uncapped = 0.0;  // equals sum_se except for HEU
    bool feasible = false;
    double max_violation = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_time_s = 0.0;
    bool solver_error = false;
    std::string error;
};

struct ExperimentResult {
    std::vector<RealizationRecord> records;  // sorted by (realization, solver name)

    std::vector<double> sum_se_values(Solver s) const;
    std::vector<double> wall_times(Solver s) const;
};

// Runs every selected solver on every realization. Realizations are
// distributed over an OpenMP worker pool; records come back in canonical
// order so the output is independent of the parallelism level. Individual
// solver failures are recorded per row and never abort the sweep.
ExperimentResult run_monte_carlo(const ExperimentSpec &spec);

// Expected output shape without running any solver.
struct RowCounts {
    long per_ue_rows = 0;
    long summary_rows = 0;
};
RowCounts expected_row_counts(const ExperimentSpec &spec);

// Writes per_ue.csv, summary.csv and one sum-SE CDF file per solver into
// spec.output_dir. With header_only, emits just the schemas (dry-run mode).
void write_results(const ExperimentResult &result, const ExperimentSpec &spec,
                   bool header_only = false);

// Empirical CDF of the values: sorted samples paired with probabilities i/n.
std::vector<std::pair<double, double>> emit_cdf(const std::vector<double> &values);

// Sample median (average of the two central order statistics for even n).
double median(std::vector<double> values);
// Median recovered from emitted CDF pairs by interpolating the inverse CDF at
// one half with midpoint plotting positions; agrees with median().
double median_from_cdf(const std::vector<std::pair<double, double>> &pairs);

}  // namespace cfmimo
