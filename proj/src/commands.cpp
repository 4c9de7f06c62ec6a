#include "airfc/commands.hpp"

#include "airfc/config.hpp"
#include "airfc/report.hpp"
#include "airfc/serialization.hpp"

#include <omp.h>

#include <fstream>

namespace airfc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Prepared {
    ExperimentConfig cfg;
    std::string hash;
    fs::path out;
};

Prepared prepare(const CommandOptions& opts) {
    Prepared p;
    p.cfg = load_config(opts.config);
    if (opts.seed) p.cfg.seed = *opts.seed;
    if (opts.out_dir) p.cfg.out_dir = *opts.out_dir;
    if (opts.workers) {
        if (*opts.workers < 0) throw ConfigError("--workers", 0, "must be >= 0");
        p.cfg.workers = *opts.workers;
    }
    if (opts.no_plots) p.cfg.plots = false;
    if (p.cfg.workers > 0) omp_set_num_threads(p.cfg.workers);
    p.hash = config_hash(p.cfg);
    p.out = p.cfg.out_dir;
    return p;
}

// Task and baseline; a malformed or mismatched weight file is an input error.
std::pair<SyntheticTask, DigitalBaseline> make_baseline(const ExperimentConfig& cfg) {
    SyntheticTask task = make_synthetic_task(cfg.antennas, cfg.classes, cfg.samples, cfg.spread, cfg.effective_task_seed());
    if (!cfg.weights_file) return {task, train_digital_fc(task, cfg.ridge)};
    WeightFile wf;
    try {
        wf = weights_from_json(read_json_file(*cfg.weights_file));
    } catch (const std::exception& e) {
        throw ConfigError("task.weights_file", 0, e.what());
    }
    if (wf.w.rows() != cfg.antennas)
        throw ConfigError("task.weights_file", 0, "weight matrix is " + std::to_string(wf.w.rows()) + "x" +
                                                      std::to_string(wf.w.cols()) + " but system.antennas is " +
                                                      std::to_string(cfg.antennas));
    return {task, baseline_from_weights(wf.w, wf.b, task)};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_baseline(const fs::path& path, const DigitalBaseline& b) { write_json_file(path, weights_to_json({b.w, b.b})); }

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace

int cmd_validate(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        ExperimentConfig cfg = load_config(opts.config);
        if (opts.seed) cfg.seed = *opts.seed;
        log << "ok " << config_hash(cfg) << '\n';
        return kExitOk;
    });
}

int cmd_optimize(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const Prepared p = prepare(opts);
        const auto& cfg = p.cfg;
        auto [task, baseline] = make_baseline(cfg);

        const std::uint64_t seed = trial_seed(cfg.seed, 0);
        ChannelSet ch;
        if (cfg.channel_file) {
            try {
                ch = channel_set_from_json(read_json_file(*cfg.channel_file));
            } catch (const std::exception& e) {
                throw ConfigError("channel.file", 0, e.what());
            }
            if (ch.n_t() != cfg.antennas || ch.n_r() != cfg.antennas)
                throw ConfigError("channel.file", 0, "channel antenna counts do not match system.antennas");
        } else {
            const Topology topo = generate_topology(cfg.d_max_m, cfg.groups, cfg.relays_per_group, cfg.heights,
                                                    derive_seed(seed, {1}));
            ch = generate_channel_set(topo, cfg.channel_config(), derive_seed(seed, {2}));
        }
        const NoiseModel noise = cfg.noise_model(ch.num_groups());
        const PowerBudget budget = PowerBudget::uniform(cfg.p_max_w, ch.relays_per_group(), cfg.p_relay_w);

        fs::create_directories(p.out);
        RunManifest manifest("optimize", opts.config.string(), p.hash);
        manifest.set_workers(omp_get_max_threads());
        manifest.set_seeds({{"base", cfg.seed},
                            {"trial", seed},
                            {"topology", derive_seed(seed, {1})},
                            {"channel", cfg.channel_file ? json(nullptr) : json(derive_seed(seed, {2}))},
                            {"evaluation", derive_seed(seed, {3})},
                            {"task", cfg.effective_task_seed()}});

        write_json_file(p.out / "channel.chset.json", channel_set_to_json(ch));
        manifest.add(p.out / "channel.chset.json", "channel");
        write_baseline(p.out / "baseline.wmat.json", baseline);
        manifest.add(p.out / "baseline.wmat.json", "weights");

        log << "optimize: N=" << cfg.antennas << " L=" << ch.num_groups() << " K=" << ch.group_size(0)
            << " baseline accuracy " << baseline.reported_accuracy << '\n';

        AoResult result;
        try {
            result = run_ao(ch, baseline.w, noise, budget, cfg.ao);
        } catch (const ao_failure& e) {
            std::ofstream trace(p.out / "trace.csv");
            write_trace_csv(trace, e.trace());
            trace.close();
            manifest.add(p.out / "trace.csv", "trace");
            manifest.finish(p.out / "manifest.json");
            throw;
        }

        {
            std::ofstream trace(p.out / "trace.csv");
            write_trace_csv(trace, result.trace);
        }
        manifest.add(p.out / "trace.csv", "trace");
        write_json_file(p.out / "params.json", params_to_json(result.params));
        manifest.add(p.out / "params.json", "params");

        Rng eval_rng(derive_seed(seed, {3}));
        const double accuracy =
            evaluate_ota_accuracy(result.params, ch, noise, baseline, task, cfg.noise_draws, eval_rng, cfg.tie);
        const auto& last = result.trace.iterations.back();
        const json objective = {{"imitation_error", last.objective.imitation_error},
                                {"noise_penalty", last.objective.noise_penalty},
                                {"total", last.objective.total},
                                {"initial_total", result.trace.iterations.front().objective.total},
                                {"iterations", result.trace.iteration_count},
                                {"termination", std::string(to_string(result.trace.reason))},
                                {"max_violation", last.max_violation},
                                {"nmse", imitation_nmse(realized_map(result.params, ch), baseline.w)},
                                {"accuracy", accuracy},
                                {"baseline_accuracy", baseline.reported_accuracy},
                                {"rank_bound", realized_rank_bound(ch)},
                                {"realized_rank", numerical_rank(realized_map(result.params, ch))}};
        write_json_file(p.out / "objective.json", objective);
        manifest.add(p.out / "objective.json", "objective");
        manifest.finish(p.out / "manifest.json");

        log << "optimize: " << result.trace.iteration_count << " iterations (" << to_string(result.trace.reason)
            << "), objective " << last.objective.total << ", NMSE " << objective["nmse"].get<double>()
            << ", accuracy " << accuracy << '\n';
        log << "wrote " << p.out.string() << '\n';
        return kExitOk;
    });
}

int cmd_sweep(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const Prepared p = prepare(opts);
        const auto& cfg = p.cfg;
        if (!cfg.sweep) throw ConfigError("sweep", 0, "the sweep command needs a sweep section");
        if (cfg.channel_file) err << "note: channel.file is ignored by sweep (every trial draws its own channel)\n";
        auto [task, baseline] = make_baseline(cfg);

        const auto points = cfg.sweep->points();
        const int trials = cfg.sweep->trials;
        log << "sweep: " << points.size() << " grid points x " << trials << " trials on " << omp_get_max_threads()
            << " thread(s); baseline accuracy " << baseline.reported_accuracy << '\n';
        const auto results = monte_carlo_sweep(points, trials, cfg.seed, cfg.sweep_setup(), baseline, task);

        fs::create_directories(p.out);
        RunManifest manifest("sweep", opts.config.string(), p.hash);
        manifest.set_workers(omp_get_max_threads());
        json trial_seeds = json::array();
        for (int t = 0; t < trials; ++t) trial_seeds.push_back(trial_seed(cfg.seed, t));
        manifest.set_seeds({{"base", cfg.seed}, {"task", cfg.effective_task_seed()}, {"trials", trial_seeds}});

        {
            std::ofstream csv(p.out / "trials.csv", std::ios::binary);
            write_trials_csv(csv, results);
        }
        manifest.add(p.out / "trials.csv", "trials");
        json summary = sweep_summary_json(results, baseline.reported_accuracy);
        summary["config_hash"] = p.hash;
        write_json_file(p.out / "summary.json", summary);
        manifest.add(p.out / "summary.json", "summary");
        write_baseline(p.out / "baseline.wmat.json", baseline);
        manifest.add(p.out / "baseline.wmat.json", "weights");

        if (cfg.plots) {
            for (const char* metric : {"accuracy", "nmse"}) {
                for (auto& plot : sweep_plots(results, metric, baseline.reported_accuracy)) {
                    if (cfg.plot_timestamps) plot.spec.timestamp = utc_timestamp();
                    const fs::path file = p.out / (plot.stem + ".svg");
                    write_text(file, render_svg(plot.spec));
                    manifest.add(file, "plot");
                }
            }
        }
        manifest.finish(p.out / "manifest.json");

        int failed = 0;
        for (const auto& r : results) {
            log << "  L=" << r.point.groups << " K=" << r.point.relays_per_group << " P_k=" << r.point.p_relay_w
                << " D=" << r.point.d_max_m << (r.point.direct_link ? " direct" : "") << ": accuracy "
                << r.accuracy.mean << " +- " << r.accuracy.std << ", NMSE " << r.nmse.mean << " (" << r.completed
                << "/" << r.trials.size() << ")\n";
            if (r.completed == 0) ++failed;
        }
        log << "wrote " << p.out.string() << '\n';
        if (failed == static_cast<int>(results.size())) {
            err << "error: every grid point failed\n";
            return kExitRuntime;
        }
        return kExitOk;
    });
}

}  // namespace airfc
