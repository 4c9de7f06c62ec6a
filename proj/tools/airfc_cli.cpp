// airfc: optimize a relay network to imitate a fully connected layer, or sweep it.
#include "airfc/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Over-the-air fully connected layer imitation with AF relay networks"};
    app.require_subcommand(1);

    airfc::CommandOptions opts;
    std::string out;
    int workers = 0;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool runs) {
        sub->add_option("--config", opts.config, "experiment configuration (YAML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the base seed");
        if (!runs) return;
        sub->add_option("--out", out, "output directory");
        sub->add_option("--workers", workers, "worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--no-plots", opts.no_plots, "skip SVG plots");
    };
    auto* optimize = app.add_subcommand("optimize", "run alternating optimization on one channel realization");
    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over the configured grid");
    auto* validate = app.add_subcommand("validate", "check a configuration file without running anything");
    add_common(optimize, true);
    add_common(sweep, true);
    add_common(validate, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return airfc::kExitConfig;
    }

    for (auto* sub : {optimize, sweep, validate}) {
        if (sub->count("--seed")) opts.seed = seed;
        if (sub->get_option_no_throw("--out") && sub->count("--out")) opts.out_dir = out;
        if (sub->get_option_no_throw("--workers") && sub->count("--workers")) opts.workers = workers;
    }

    if (*optimize) return airfc::cmd_optimize(opts, std::cout, std::cerr);
    if (*sweep) return airfc::cmd_sweep(opts, std::cout, std::cerr);
    return airfc::cmd_validate(opts, std::cout, std::cerr);
}
