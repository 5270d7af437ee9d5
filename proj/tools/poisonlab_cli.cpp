// Subpopulation label-flipping poisoning experiments, driven by one JSON
// config. Subcommands: generate, attack-matrix, theorem, boundary, delta.
//
// Exit codes: 0 success, 2 config or usage error, 3 runtime failure
// (failed matrix cells or a theorem row below its bound).

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "poisonlab/poisonlab.hpp"

namespace {

int default_workers() {
    if (const char* env = std::getenv("POISONLAB_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (...) {
        }
        std::cerr << "warning: ignoring invalid POISONLAB_WORKERS='" << env << "'\n";
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisonlab: subpopulation label-flipping poisoning experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int workers = default_workers();
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool save_models = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--workers", workers, "worker threads for independent cells");
        cmd->add_option("--seed", seed, "master seed (overrides config)")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_flag("--save-models", save_models, "write per-cell model files");
    };

    CLI::App* generate = app.add_subcommand("generate", "write the synthetic dataset and subgroup table");
    CLI::App* attack = app.add_subcommand("attack-matrix", "run the poisoning damage matrix");
    CLI::App* theorem = app.add_subcommand("theorem", "Monte-Carlo check of the 0-local attack bound");
    CLI::App* boundary = app.add_subcommand("boundary", "rasterize clean vs poisoned decision regions");
    CLI::App* delta = app.add_subcommand("delta", "estimate per-subgroup locality of each model");
    for (auto* cmd : {generate, attack, theorem, boundary, delta}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        poisonlab::RunOptions options;
        options.out_dir = out_dir;
        options.workers = workers;
        if (seed_given) options.seed_override = seed;
        options.save_models = save_models;

        poisonlab::ExperimentConfig cfg =
            poisonlab::apply_overrides(poisonlab::load_config(config_path), options);

        if (generate->parsed()) return poisonlab::cmd_generate(cfg);
        if (attack->parsed()) return poisonlab::cmd_attack_matrix(cfg, options);
        if (theorem->parsed()) return poisonlab::cmd_theorem(cfg);
        if (boundary->parsed()) return poisonlab::cmd_boundary(cfg, options);
        if (delta->parsed()) return poisonlab::cmd_delta(cfg);
        return 2;
    } catch (const poisonlab::validation_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
