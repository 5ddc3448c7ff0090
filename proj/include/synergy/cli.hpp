#pragma once

// Batch commands behind the `synergy` executable. Each returns a process
// exit status: 0 success, 1 configuration, 2 I/O, 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synergy/config.hpp"

namespace synergy {

enum ExitCode : int { Success = 0, ConfigFailure = 1, IoFailure = 2, NumericalFailure = 3 };

struct CliOptions
{
    std::filesystem::path config;
    bool verbose = false;
    std::optional<unsigned> threads;
};

inline int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
        dynamic_cast<const RangeError*>(&e)) {
        return ConfigFailure;
    }
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const InputError*>(&e)) {
        return IoFailure;
    }
    return NumericalFailure;
}

/// --threads, then SYNERGY_THREADS, then the configuration, then the hardware.
inline unsigned resolve_threads(const CliOptions& opts, const RunConfig& cfg)
{
    if (opts.threads) {
        return std::max(1u, *opts.threads);
    }
    if (std::getenv("SYNERGY_THREADS") || !cfg.threads) {
        return default_thread_count();
    }
    return *cfg.threads;
}

namespace detail {

inline std::string fmt(double v, int precision = 6)
{
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

/// Stream for held-out synthetic tasks, distinct from the training stream.
inline std::uint64_t test_seed(std::uint64_t seed)
{
    return seed ^ 0x9e3779b97f4a7c15ULL;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

inline const AmmConfig& require_amm(const RunConfig& cfg)
{
    if (!cfg.amm) {
        throw ConfigError(cfg.source.string() + ": missing required section \"amm\"");
    }
    return *cfg.amm;
}

/// Joint-major template -> time-major velocity series.
inline Vector time_major(const Vector& tmpl, Index n)
{
    const Index T_s = tmpl.size() / n;
    Vector out(tmpl.size());
    for (Index i = 0; i < n; ++i) {
        for (Index t = 0; t < T_s; ++t) {
            out[t * n + i] = tmpl[i * T_s + t];
        }
    }
    return out;
}

} // namespace detail

inline int cmd_synth(const CliOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig cfg = load_run_config(opts.config);
        const std::uint64_t seed = cfg.require_seed();
        if (!cfg.synthetic) {
            throw ConfigError(cfg.source.string() + ": missing required section \"synthetic\"");
        }
        const auto& syn = *cfg.synthetic;
        SyntheticSpec spec = syn.spec;
        spec.seed = seed;
        const auto& dataset_path = cfg.paths.at("dataset");
        const auto& truth_path = cfg.paths.at("truth");

        const auto plan = ShiftPlan::uniform(syn.T, syn.T_s);
        const SyntheticData synth = generate_synthetic(spec, syn.n, syn.T, syn.T_s, syn.G, plan, syn.sample_rate);
        save_csv(dataset_path, synth.data);
        save_truth_json(truth_path, synth, spec);
        out << "dataset: n = " << syn.n << ", T = " << syn.T << ", G = " << syn.G << ", SNR = "
            << (spec.snr_db ? detail::fmt(*spec.snr_db) + " dB" : std::string("noiseless"))
            << ", noise sigma = " << detail::fmt(synth.noise_sigma) << '\n';
        out << "wrote " << dataset_path.string() << " and " << truth_path.string() << '\n';

        if (syn.test_G > 0) {
            const Index test_T = syn.test_T.value_or(syn.T);
            const auto test_plan = ShiftPlan::uniform(test_T, syn.T_s);
            const SyntheticData test = generate_from_truth(synth.truth, spec, test_T, syn.test_G, test_plan,
                                                           detail::test_seed(seed), syn.sample_rate);
            const auto& test_path = cfg.paths.at("test_dataset");
            save_csv(test_path, test.data);
            if (cfg.paths.has("test_truth")) {
                save_truth_json(cfg.paths.at("test_truth"), test, spec);
            }
            out << "held-out: T = " << test_T << ", G = " << syn.test_G << ", noise sigma = "
                << detail::fmt(test.noise_sigma) << "; wrote " << test_path.string() << '\n';
        }
        return int(Success);
    });
}

inline int cmd_train(const CliOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig cfg = load_run_config(opts.config);
        AmmConfig amm = detail::require_amm(cfg);
        amm.seed = cfg.require_seed();
        amm.threads = resolve_threads(opts, cfg);
        const auto& bank_path = cfg.paths.at("bank");
        const VelocityDataset data = load_velocity_csv(cfg.paths.at("dataset"));
        if (amm.T_s > data.T) {
            throw ConfigError("amm.T_s = " + std::to_string(amm.T_s) + " exceeds the dataset window T = " +
                              std::to_string(data.T));
        }
        const auto plan = ShiftPlan::uniform(data.T, amm.T_s);
        ProgressSink sink;
        if (opts.verbose) {
            sink = [&err](const IterationRecord& r) {
                err << "iter " << r.iteration << "  objective " << detail::fmt(r.objective, 10) << "  active "
                    << r.active_count << '\n';
            };
        }

        AmmState state;
        std::vector<std::size_t> task_ids; // coefficient rows -> dataset task
        if (cfg.grid) {
            GridSpec grid = *cfg.grid;
            grid.split_seed = amm.seed;
            TestSettings scoring = cfg.test.value_or(TestSettings{});
            scoring.threads = amm.threads;
            const auto grid_dir = cfg.paths.has("grid_dir") ? cfg.paths.at("grid_dir") : bank_path.parent_path() / "grid";
            std::vector<std::string> bank_files;
            const GridResult result = grid_search(amm, grid, scoring, data, plan, [&](const GridPoint& p, std::size_t k) {
                std::ostringstream name;
                name << "bank_" << std::setw(3) << std::setfill('0') << k << ".json";
                save_bank_json(grid_dir / name.str(), {p.state.bank, data.T, data.sample_rate});
                bank_files.push_back(name.str());
                if (opts.verbose) {
                    err << "grid point " << k << ": lambda1 " << p.penalty.lambda1 << ", lambda2 "
                        << p.penalty.lambda2 << ", alpha " << p.alpha << " -> m_final " << p.m_final
                        << ", validation error " << detail::fmt(p.validation_error) << '\n';
                }
            });
            const auto summary =
                cfg.paths.has("grid_summary") ? cfg.paths.at("grid_summary") : grid_dir / "summary.json";
            save_grid_summary_json(summary, result, bank_files);
            const auto& chosen = result.points[result.selected];
            out << "grid: " << result.points.size() << " points, selected " << result.selected << " (lambda1 "
                << chosen.penalty.lambda1 << ", lambda2 " << chosen.penalty.lambda2 << ", alpha " << chosen.alpha
                << ", validation error " << detail::fmt(chosen.validation_error) << ")\n";
            state = result.model();
            if (result.refit) {
                for (std::size_t g = 0; g < data.size(); ++g) {
                    task_ids.push_back(g);
                }
            } else {
                task_ids = result.train_tasks;
            }
        } else {
            state = run(amm, data, plan, sink);
            for (std::size_t g = 0; g < data.size(); ++g) {
                task_ids.push_back(g);
            }
        }

        save_bank_json(bank_path, {state.bank, data.T, data.sample_rate});
        if (cfg.paths.has("coefficients")) {
            save_coefficients_csv(cfg.paths.at("coefficients"), state.coeffs, plan, task_ids);
        }
        if (cfg.paths.has("trace")) {
            save_trace_csv(cfg.paths.at("trace"), state.history);
        }
        const double final_objective = state.objective_trace.empty() ? 0.0 : state.objective_trace.back();
        out << "m_final = " << state.bank.active_count() << '\n';
        out << "final objective = " << detail::fmt(final_objective, 10) << " after " << state.iteration
            << " outer iterations" << (state.converged ? "" : " (iteration limit reached)") << '\n';
        return int(Success);
    });
}

inline int cmd_test(const CliOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig cfg = load_run_config(opts.config);
        TestSettings settings = cfg.test.value_or(TestSettings{});
        settings.threads = resolve_threads(opts, cfg);
        const auto& report_path = cfg.paths.at("report");
        const BankFile bank = load_bank_json(cfg.paths.at("bank"));
        const VelocityDataset test = load_velocity_csv(cfg.paths.at("test_dataset"));
        if (bank.bank.active_count() == 0) {
            err << "warning: the bank has no active synergies; every reconstruction is zero\n";
        }
        const SuiteReport report = evaluate_suite(bank.bank, test, settings);
        save_report_json(report_path, report);
        if (cfg.paths.has("report_csv")) {
            save_report_csv(cfg.paths.at("report_csv"), report);
        }
        if (cfg.paths.has("reconstructions") && !report.tasks.empty()) {
            VelocityDataset recon = test;
            for (std::size_t g = 0; g < test.size(); ++g) {
                recon.tasks[g] = report.tasks[g].v_hat;
            }
            save_csv(cfg.paths.at("reconstructions"), recon);
        }
        out << "bank columns: " << report.columns_total << " built, " << report.columns_kept
            << " kept; active synergies: " << report.m_active << '\n';
        if (report.mean) {
            out << "mean error = " << detail::fmt(*report.mean) << " +- "
                << (report.std ? detail::fmt(*report.std) : std::string("n/a")) << " over " << report.tasks.size()
                << " tasks\n";
        } else {
            out << "mean error undefined (no test tasks)\n";
        }
        return int(Success);
    });
}

inline int cmd_postures(const CliOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig cfg = load_run_config(opts.config);
        const auto& postures_path = cfg.paths.at("postures");
        const BankFile file = load_bank_json(cfg.paths.at("bank"));
        const auto& bank = file.bank;
        Vector initial = Vector::Zero(bank.n);
        if (cfg.postures.initial_angles) {
            const auto& a = *cfg.postures.initial_angles;
            if (static_cast<Index>(a.size()) != bank.n) {
                throw ConfigError("postures.initial_angles has " + std::to_string(a.size()) + " entries, the bank has " +
                                  std::to_string(bank.n) + " joints");
            }
            initial = Eigen::Map<const Vector>(a.data(), bank.n);
        }

        std::vector<AngleTrajectory> trajectories;
        std::vector<std::size_t> synergy_ids;
        for (std::size_t j = 0; j < bank.size(); ++j) {
            if (bank.active[j]) {
                trajectories.push_back(integrate(detail::time_major(bank.templates[j], bank.n), initial, file.sample_rate));
                synergy_ids.push_back(j + 1);
            }
        }

        auto os = detail::open_for_write(postures_path);
        os << "synergy,fraction,t,joint_id,angle\n";
        for (std::size_t q = 0; q < trajectories.size(); ++q) {
            const Matrix& angles = trajectories[q].angles;
            const Index T_s = angles.cols();
            for (double f : cfg.postures.fractions) {
                const auto t = static_cast<Index>(std::llround(f * static_cast<double>(T_s - 1)));
                for (Index i = 0; i < bank.n; ++i) {
                    os << synergy_ids[q] << ',' << detail::format_double(f) << ',' << t + 1 << ',' << i + 1 << ','
                       << detail::format_double(angles(i, t)) << '\n';
                }
            }
        }
        if (!os) {
            throw IoError("failed writing " + postures_path.string());
        }
        if (cfg.paths.has("angle_trajectories")) {
            if (trajectories.empty()) {
                err << "warning: no active synergies; " << cfg.paths.at("angle_trajectories").string()
                    << " not written\n";
            } else {
                save_csv(cfg.paths.at("angle_trajectories"), trajectories);
            }
        }
        out << "postures for " << trajectories.size() << " synergies at " << cfg.postures.fractions.size()
            << " fractions; wrote " << postures_path.string() << '\n';
        return int(Success);
    });
}

inline int run_command(const std::string& command, const CliOptions& opts, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr)
{
    if (command == "synth") {
        return cmd_synth(opts, out, err);
    }
    if (command == "train") {
        return cmd_train(opts, out, err);
    }
    if (command == "test") {
        return cmd_test(opts, out, err);
    }
    if (command == "postures") {
        return cmd_postures(opts, out, err);
    }
    err << "error: unknown command \"" << command << "\"\n";
    return ConfigFailure;
}

} // namespace synergy
