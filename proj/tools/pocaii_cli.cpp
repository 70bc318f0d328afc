#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pocaii/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multi-fidelity hyperparameter optimization engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string worker_cmd;
    std::string log_path;
    std::uint64_t seed = 0;
    long long pause_after = -1;
    int parallel = 1;

    CLI::App* run = app.add_subcommand("run", "execute one optimization run");
    run->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "seed override (default: first config seed)");
    run->add_option("--out", out_dir, "output directory override");
    run->add_option("--worker-cmd", worker_cmd, "subprocess objective command override");
    run->add_option("--pause-after", pause_after,
                    "pause at the next phase boundary once this much budget is spent");

    CLI::App* compare = app.add_subcommand("compare", "run every (algorithm, seed) pair and "
                                                      "emit trajectory/rank tables");
    compare->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    compare->add_option("--out", out_dir, "output directory override");
    compare->add_option("--worker-cmd", worker_cmd, "subprocess objective command override");
    compare->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);

    CLI::App* resume = app.add_subcommand("resume", "continue an interrupted run from its log");
    resume->add_option("log", log_path, "trial log of the interrupted run")
        ->required()
        ->check(CLI::ExistingFile);
    resume->add_option("--worker-cmd", worker_cmd, "subprocess objective command override");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        pocaii::RunCommandOptions options;
        if (run->count("--seed") > 0) options.seed = seed;
        if (!out_dir.empty()) options.out = out_dir;
        options.worker_cmd = worker_cmd;
        options.pause_after_spend = pause_after;
        return pocaii::cmd_run(config_path, options, std::cout, std::cerr);
    }
    if (compare->parsed()) {
        pocaii::CompareCommandOptions options;
        if (!out_dir.empty()) options.out = out_dir;
        options.worker_cmd = worker_cmd;
        options.parallel = parallel;
        return pocaii::cmd_compare(config_path, options, std::cout, std::cerr);
    }
    return pocaii::cmd_resume(log_path, worker_cmd, std::cout, std::cerr);
}
