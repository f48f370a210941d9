#include <omp.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfmimo/baselines.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/experiment.hpp"
#include "cfmimo/validation.hpp"

namespace {

using namespace cfmimo;

int cmd_run(const std::string &spec_path, std::uint64_t seed, bool seed_set, int realizations,
            const std::string &solvers_csv, const std::string &out_dir, int jobs, bool dry_run) {
    ExperimentSpec spec;
    try {
        spec = load_spec_file(spec_path);
        if (seed_set) spec.network.rng_seed = seed;
        if (realizations > 0) spec.num_realizations = realizations;
        if (!out_dir.empty()) spec.output_dir = out_dir;
        if (jobs > 0) spec.parallelism = jobs;
        if (!solvers_csv.empty()) {
            spec.solvers.clear();
            std::stringstream ss(solvers_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) spec.solvers.push_back(parse_solver(tok));
        }
        spec.validate();
    } catch (const std::exception &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    RowCounts counts = expected_row_counts(spec);
    if (dry_run) {
        write_results({}, spec, /*header_only=*/true);
        std::cout << "dry run: " << counts.per_ue_rows << " per-UE rows, " << counts.summary_rows
                  << " summary rows; schemas written to " << spec.output_dir << "\n";
        return 0;
    }

    try {
        ExperimentResult result = run_monte_carlo(spec);
        write_results(result, spec);
        int errors = 0;
        for (const auto &r : result.records)
            if (r.solver_error) ++errors;
        std::cout << "wrote " << counts.per_ue_rows << " per-UE rows and " << counts.summary_rows
                  << " summary rows to " << spec.output_dir << "\n";
        for (Solver s : spec.solvers) {
            auto v = result.sum_se_values(s);
            if (v.empty()) continue;
            std::printf("  %-4s median sum SE %8.3f bit/s/Hz over %zu realizations\n",
                        solver_name(s).c_str(), median(v), v.size());
        }
        if (errors > 0) std::cout << "  (" << errors << " solver rows recorded an error)\n";
        return 0;
    } catch (const std::exception &e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    }
}

int cmd_validate(bool full) {
    auto results = run_validation_suite(/*quick=*/!full);
    bool all = true;
    for (const auto &r : results) {
        std::printf("[%s] %-36s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.pass;
    }
    return all ? 0 : 2;
}

double time_call(const std::function<void()> &fn, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void bench_kernels() {
    std::printf("kernel benchmark (serial reference vs OpenMP, %d threads)\n", omp_get_max_threads());
    std::printf("%-10s %-22s %12s %12s %8s\n", "size", "kernel", "serial_ms", "parallel_ms", "speedup");
    for (auto [M, K] : {std::pair{150, 40}, std::pair{300, 40}}) {
        NetworkConfig cfg = make_config(M, K, 15);
        Realization r = make_realization(cfg, 7);
        auto ws = kernels::make_workspace(r, cfg);
        Mat theta(M, K), z(M, K);
        for (size_t i = 0; i < theta.size(); ++i) {
            theta.data[i] = 0.5 / std::sqrt(static_cast<double>(K));
            z.data[i] = 0.7;
        }
        kernels::PenaltyConfig pc;
        pc.qos_se = cfg.qos_se;
        pc.fronthaul_cap = cfg.fronthaul_cap;
        char size[32];
        std::snprintf(size, sizeof(size), "%dx%d", M, K);

        int reps = 200;
        double t_ref = time_call([&] { kernels::ref::spectral_efficiency(theta, ws); }, reps);
        double t_par = time_call([&] { kernels::spectral_efficiency(theta, ws); }, reps);
        std::printf("%-10s %-22s %12.4f %12.4f %7.1fx\n", size, "spectral_efficiency",
                    1e3 * t_ref, 1e3 * t_par, t_ref / t_par);

        t_ref = time_call([&] { kernels::ref::objective(theta, z, ws, pc); }, reps);
        t_par = time_call([&] { kernels::objective(theta, z, ws, pc); }, reps);
        std::printf("%-10s %-22s %12.4f %12.4f %7.1fx\n", size, "penalized_objective",
                    1e3 * t_ref, 1e3 * t_par, t_ref / t_par);

        reps = 50;
        t_ref = time_call([&] { kernels::ref::gradient(theta, z, ws, pc); }, reps);
        t_par = time_call([&] { kernels::gradient(theta, z, ws, pc); }, reps);
        std::printf("%-10s %-22s %12.4f %12.4f %7.1fx\n", size, "gradient",
                    1e3 * t_ref, 1e3 * t_par, t_ref / t_par);
    }
}

int cmd_bench(const std::string &preset, int realizations, int jobs, bool skip_kernels,
              bool skip_solvers) {
    if (!skip_kernels) bench_kernels();
    if (skip_solvers) return 0;

    ExperimentSpec spec;
    try {
        spec = preset_spec(preset);
        spec.num_realizations = realizations;
        spec.parallelism = jobs > 0 ? jobs : 1;
        spec.validate();
    } catch (const std::exception &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    std::printf("\nsolver benchmark: %s, %d realizations\n", preset.c_str(), realizations);
    ExperimentResult result = run_monte_carlo(spec);
    double sca_mean = 0.0, apg_mean = 0.0;
    std::printf("%-6s %14s %16s\n", "solver", "mean_time_s", "median_sum_se");
    for (Solver s : {Solver::SCA, Solver::APG, Solver::FULL, Solver::HEU}) {
        auto times = result.wall_times(s);
        auto sums = result.sum_se_values(s);
        if (times.empty()) continue;
        double mean = std::accumulate(times.begin(), times.end(), 0.0) / times.size();
        if (s == Solver::SCA) sca_mean = mean;
        if (s == Solver::APG) apg_mean = mean;
        std::printf("%-6s %14.3f %16.3f\n", solver_name(s).c_str(), mean, median(sums));
    }
    if (sca_mean > 0.0 && apg_mean > 0.0) {
        std::printf("SCA/APG run-time ratio: %.2f\n", sca_mean / apg_mean);
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Cell-free massive MIMO joint user-association and power-control simulator"};
    app.require_subcommand(1);

    auto *run = app.add_subcommand("run", "run a Monte-Carlo experiment from a JSON spec file");
    std::string spec_path, solvers_csv, out_dir;
    std::uint64_t seed = 0;
    int realizations = 0, jobs = 0;
    bool dry_run = false;
    run->add_option("spec", spec_path, "path to the experiment spec (JSON)")->required();
    auto *seed_opt = run->add_option("--seed", seed, "override the base RNG seed");
    run->add_option("--realizations", realizations, "override the realization count");
    run->add_option("--solvers", solvers_csv, "comma-separated solver list (SCA,APG,FULL,HEU)");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "worker count for the realization pool");
    run->add_flag("--dry-run", dry_run, "write schemas and report row counts without solving");

    auto *validate = app.add_subcommand("validate", "run the built-in correctness checks");
    bool full = false;
    validate->add_flag("--full", full, "use the full-size check configuration");

    auto *bench = app.add_subcommand("bench", "kernel and solver run-time comparison");
    std::string preset = "large-150x40";
    int bench_realizations = 3;
    int bench_jobs = 1;
    bool skip_kernels = false, skip_solvers = false;
    bench->add_option("--preset", preset, "scenario preset for the solver benchmark");
    bench->add_option("--realizations", bench_realizations, "realizations per solver");
    bench->add_option("--jobs", bench_jobs, "worker count");
    bench->add_flag("--skip-kernels", skip_kernels, "skip the kernel micro-benchmark");
    bench->add_flag("--skip-solvers", skip_solvers, "skip the solver benchmark");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (run->parsed()) {
        return cmd_run(spec_path, seed, seed_opt->count() > 0, realizations, solvers_csv, out_dir,
                       jobs, dry_run);
    }
    if (validate->parsed()) return cmd_validate(full);
    if (bench->parsed()) {
        return cmd_bench(preset, bench_realizations, bench_jobs, skip_kernels, skip_solvers);
    }
    return 1;
}
