#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plar/commands.hpp"
#include "plar/config.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "key=value config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", args.out_override, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed_override, "base seed (overrides config)");
}

plar::RunConfig load(const CLI::App* cmd, const CliArgs& args) {
    plar::RunConfig cfg = plar::parse_config_file(args.config_path);
    if (!args.out_override.empty()) cfg.out = args.out_override;
    if (cmd->count("--seed") > 0) cfg.seed = args.seed_override;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"count time series fitting, simulation, and diagnostics"};
    app.require_subcommand(1);

    CliArgs fit_args, sim_args, exp_args, prox_args;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a series from input CSV");
    add_common(fit_cmd, fit_args);
    CLI::App* sim_cmd = app.add_subcommand("simulate", "generate one corrupted series");
    add_common(sim_cmd, sim_args);
    CLI::App* exp_cmd = app.add_subcommand("experiment", "run repeated simulate-and-fit");
    add_common(exp_cmd, exp_args);
    CLI::App* prox_cmd = app.add_subcommand("prox-curve", "tabulate shrinkage curves");
    add_common(prox_cmd, prox_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(fit_cmd)) return plar::cmd_fit(load(fit_cmd, fit_args));
        if (app.got_subcommand(sim_cmd)) return plar::cmd_simulate(load(sim_cmd, sim_args));
        if (app.got_subcommand(exp_cmd)) return plar::cmd_experiment(load(exp_cmd, exp_args));
        if (app.got_subcommand(prox_cmd)) return plar::cmd_prox_curve(load(prox_cmd, prox_args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
