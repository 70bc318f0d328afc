#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocaii/baselines.hpp"
#include "pocaii/scheduler.hpp"

namespace pocaii {

//! One experiment: a search space, an objective, a budget, seeds, and one or
//! more algorithm entries (run uses the first, compare needs at least two).
struct ExperimentConfig {
    SearchSpace space;
    nlohmann::json space_json;      // as written in the file (or "reference")
    nlohmann::json objective;       // {"type": "synthetic"|"subprocess", ...}
    long long budget = 0;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output = ".";
    std::vector<nlohmann::json> algorithms;  // each {"name": ..., params...}
};

SearchSpace space_from_json(const nlohmann::json& schema);
nlohmann::json space_to_json(const SearchSpace& space);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

//! Build the objective. `worker_cmd` overrides a subprocess command; the
//! synthetic benchmark's noise stream defaults to the run seed so
//! macro-replications see independent noise.
std::unique_ptr<ObjectiveRunner> make_runner(const nlohmann::json& objective,
                                             const SearchSpace& space, std::uint64_t seed,
                                             const std::string& worker_cmd);

PocaiiParams pocaii_params_from_json(const nlohmann::json& algo, long long budget);

//! Dispatch one algorithm entry to its runner implementation.
RunReport execute_algorithm(const nlohmann::json& algo, const ExperimentConfig& config,
                            ObjectiveRunner& runner, std::uint64_t seed, RunHooks hooks);

struct RunCommandOptions {
    std::optional<std::uint64_t> seed;       // overrides the config's first seed
    std::optional<std::filesystem::path> out;
    std::string worker_cmd;
    long long pause_after_spend = -1;  // pause at the next phase boundary past this
};

struct CompareCommandOptions {
    std::optional<std::filesystem::path> out;
    std::string worker_cmd;
    int parallel = 1;  // concurrent (algorithm, seed) runs
};

int cmd_run(const std::filesystem::path& config_path, const RunCommandOptions& options,
            std::ostream& out, std::ostream& err);

int cmd_compare(const std::filesystem::path& config_path, const CompareCommandOptions& options,
                std::ostream& out, std::ostream& err);

int cmd_resume(const std::filesystem::path& log_path, const std::string& worker_cmd,
               std::ostream& out, std::ostream& err);

//! Stepwise incumbent value of a run at a budget gridpoint: the score after
//! the last debit at or below `budget`, or the first recorded value for
//! gridpoints before any debit (keeps the trajectory table dense).
double trajectory_value(const RunReport& report, long long budget);

//! 1-based competition ranks of `values` where higher is better; ties share
//! the average of the positions they straddle.
std::vector<double> average_ranks(const std::vector<double>& values);

}  // namespace pocaii
