#include <CLI11.hpp>

#include "mfcn/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mfcn - interacting-diffusion ensemble experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string command;
    int threads = 0;

    CLI::App* run = app.add_subcommand("run", "execute an experiment from a config file");
    run->add_option("command", command, "one of: validate, lln, feynman-kac, variance, laplace, "
                                        "optimize, rare-event, rate, regimes")
        ->required();
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--out", out_dir, "output directory (default: out)");
    run->add_option("--threads", threads, "worker threads (0 = hardware default)");

    std::string manifest_path;
    int replay_threads = 0;
    CLI::App* replay = app.add_subcommand("replay", "re-run a manifest and verify byte-identical outputs");
    replay->add_option("manifest", manifest_path, "manifest file produced by run")->required();
    replay->add_option("--threads", replay_threads, "worker threads (0 = hardware default)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        const auto& commands = mfcn::experiment_commands();
        if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
            fprintf(stderr, "unknown command: %s\n", command.c_str());
            return 2;
        }
        mfcn::RunOptions options;
        options.command = command;
        options.config_path = config_path;
        options.out_dir = out_dir;
        options.threads = threads;
        return mfcn::run_experiment(options);
    }
    return mfcn::replay_manifest(manifest_path, replay_threads);
}
