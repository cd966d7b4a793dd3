// Command-line front end: exact MDP oracles, Q-trace and actor-critic
// experiment runs, truncation sweeps, the repeated-samples divergence
// demo, and finite-sample bound evaluation. See README.md for the config
// file format and output schemas.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "offnac/harness.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::vector<std::string> overrides;
    std::string mdp;
    std::string out;
    bool svg = false;
    std::uint64_t seed = 0;
    int seeds = 0;
    bool seed_set = false, seeds_set = false;
};

void attach_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "flat key=value config file");
    cmd->add_option("--set", flags.overrides, "override a config key, e.g. --set K=2000")
        ->take_all();
    cmd->add_option("--mdp", flags.mdp, "builtin name (appendix-d) or MDP file path");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_flag("--svg", flags.svg, "also emit SVG line charts");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--seeds", flags.seeds, "number of seeded runs")->each([&](const std::string&) {
        flags.seeds_set = true;
    });
}

offnac::ExperimentConfig build_config(const std::string& mode, const CommonFlags& flags) {
    offnac::ExperimentConfig cfg;
    cfg.mode = mode;
    if (!flags.config.empty()) offnac::load_config_file(cfg, flags.config);
    for (const std::string& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        offnac::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Direct flags take precedence over the config file.
    if (!flags.mdp.empty()) cfg.mdp = flags.mdp;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    if (flags.svg) cfg.svg = true;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.seeds_set) cfg.num_seeds = flags.seeds;
    cfg.mode = mode;  // the subcommand wins over any mode= in the file
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Off-policy tabular actor-critic workbench"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"solve", "exact oracles: optimal values, Q^pi, stationary distribution"},
        {"qtrace", "run the truncated-IS critic on a fixed target policy"},
        {"nac", "run the off-policy natural actor-critic loop"},
        {"exact-npg", "natural policy gradient with an exact critic"},
        {"sweep", "compare truncation-level settings"},
        {"reuse-demo", "divergence demo: reuse one critic segment every iteration"},
        {"bounds", "evaluate the finite-sample bound terms for a configuration"},
    };
    std::vector<CommonFlags> flags(std::size(subs));
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < std::size(subs); ++i) {
        CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
        attach_common(cmd, flags[i]);
        if (std::string(subs[i].name) == "bounds")
            cmd->add_flag_function("--csv", [&flags, i](std::int64_t) {
                flags[i].overrides.push_back("csv=1");
            }, "machine-readable CSV output");
        cmds.push_back(cmd);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < cmds.size(); ++i)
            if (cmds[i]->parsed()) return offnac::run_experiment(build_config(subs[i].name, flags[i]));
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
