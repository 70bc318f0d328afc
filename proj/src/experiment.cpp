#include "pocaii/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pocaii/stats.hpp"
#include "pocaii/subprocess_runner.hpp"
#include "pocaii/trial_log.hpp"

namespace pocaii {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const char* context) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string(context) + ": missing '" + key + "'");
    return j.at(key);
}

json resolved_experiment(const ExperimentConfig& config, const json& algo, std::uint64_t seed) {
    json objective = config.objective;
    // pin the noise stream so a resumed run replays the same benchmark
    if (objective.value("type", "synthetic") == "synthetic" && !objective.contains("seed"))
        objective["seed"] = seed;
    return json{{"space", config.space_json},
                {"objective", std::move(objective)},
                {"budget", config.budget},
                {"algorithm", algo}};
}

std::string run_label(const json& algo) { return algo.value("label", algo.at("name")); }

long long report_step(const json& algo) {
    const std::string name = algo.at("name");
    if (name == "pocaii") return algo.value("delta", 5);
    if (name == "random") return algo.value("delta_eval", 20);
    if (name == "hyperband") return algo.value("delta_min", 5);
    if (name == "successive-halving") return algo.value("delta_start", 5);
    return 5;
}

void write_summary(std::ostream& out, const RunReport& report,
                   const std::filesystem::path& log_path) {
    out << "algorithm:      " << report.algorithm << "\n"
        << "seed:           " << report.seed << "\n"
        << "spent:          " << report.spent << "/" << report.total_budget << "\n"
        << "configurations: " << report.search_config_count << "\n"
        << "iterations:     " << report.iterations << "\n";
    if (report.incumbent_id >= 0)
        out << "incumbent:      config " << report.incumbent_id << ", score " << std::setprecision(6)
            << report.incumbent_score << "\n";
    else
        out << "incumbent:      none (no successful measurement)\n";
    out << "log:            " << log_path.string() << "\n";
    if (!report.completed)
        out << "paused before the budget was exhausted; continue with the resume command\n";
}

void write_summary_file(const std::filesystem::path& path, const RunReport& report,
                        const std::filesystem::path& log_path) {
    json j{{"algorithm", report.algorithm},
           {"seed", report.seed},
           {"budget", report.total_budget},
           {"spent", report.spent},
           {"iterations", report.iterations},
           {"configurations", report.search_config_count},
           {"search_spend", report.search_spend},
           {"eval_spend", report.eval_spend},
           {"flush_spend", report.flush_spend},
           {"incumbent_id", report.incumbent_id},
           {"incumbent_score",
            std::isfinite(report.incumbent_score) ? json(report.incumbent_score) : json()},
           {"completed", report.completed},
           {"log", log_path.string()}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write summary: " + path.string());
    out << j.dump(2) << "\n";
}

}  // namespace

SearchSpace space_from_json(const json& schema) {
    if (schema.is_string()) {
        if (schema.get<std::string>() == "reference") return reference_benchmark_space();
        throw std::invalid_argument("space: unknown preset '" + schema.get<std::string>() + "'");
    }
    if (!schema.is_array() || schema.empty())
        throw std::invalid_argument("space must be \"reference\" or a non-empty parameter array");

    SearchSpace space;
    for (const json& p : schema) {
        const std::string name = require(p, "name", "space parameter");
        const std::string type = require(p, "type", "space parameter");
        if (type == "continuous")
            space.params.push_back(ParameterSpec::make_continuous(
                name, require(p, "low", "continuous parameter").get<double>(),
                require(p, "high", "continuous parameter").get<double>(), p.value("log", false)));
        else if (type == "integer")
            space.params.push_back(ParameterSpec::make_integer(
                name, require(p, "low", "integer parameter").get<long long>(),
                require(p, "high", "integer parameter").get<long long>(), p.value("log", false)));
        else if (type == "categorical")
            space.params.push_back(ParameterSpec::make_categorical(
                name,
                require(p, "choices", "categorical parameter").get<std::vector<std::string>>()));
        else
            throw std::invalid_argument("space parameter '" + name + "': unknown type '" + type +
                                        "'");
    }
    if (auto err = validate(space)) throw std::invalid_argument("space: " + *err);
    return space;
}

json space_to_json(const SearchSpace& space) {
    json out = json::array();
    for (const ParameterSpec& p : space.params) {
        json j{{"name", p.name}};
        switch (p.kind) {
            case ParamKind::continuous:
                j["type"] = "continuous";
                j["low"] = p.low;
                j["high"] = p.high;
                if (p.log_scale) j["log"] = true;
                break;
            case ParamKind::integer:
                j["type"] = "integer";
                j["low"] = static_cast<long long>(p.low);
                j["high"] = static_cast<long long>(p.high);
                if (p.log_scale) j["log"] = true;
                break;
            case ParamKind::categorical:
                j["type"] = "categorical";
                j["choices"] = p.choices;
                break;
        }
        out.push_back(std::move(j));
    }
    return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }

    ExperimentConfig config;
    try {
        config.space_json = require(j, "space", "config");
        config.space = space_from_json(config.space_json);
        config.objective = j.value("objective", json{{"type", "synthetic"}});
        config.budget = require(j, "budget", "config").get<long long>();
        if (j.contains("seeds")) config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        config.output = j.value("output", std::string{"."});
    } catch (const json::exception& e) {
        // surface wrong field types as config errors, not parser internals
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    if (config.budget <= 0) throw std::invalid_argument("config: budget must be positive");
    {
        std::vector<std::uint64_t> sorted = config.seeds;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("config: seeds must be distinct");
    }

    if (j.contains("algorithms"))
        for (const json& a : j.at("algorithms")) config.algorithms.push_back(a);
    else if (j.contains("algorithm"))
        config.algorithms.push_back(j.at("algorithm"));
    if (config.algorithms.empty())
        throw std::invalid_argument("config: needs 'algorithm' or a non-empty 'algorithms' list");
    for (const json& a : config.algorithms) {
        const std::string name = require(a, "name", "algorithm entry");
        if (name != "pocaii" && name != "hyperband" && name != "successive-halving" &&
            name != "random")
            throw std::invalid_argument("config: unknown algorithm '" + name + "'");
    }
    return config;
}

std::unique_ptr<ObjectiveRunner> make_runner(const json& objective, const SearchSpace& space,
                                             std::uint64_t seed, const std::string& worker_cmd) {
    const std::string type = objective.value("type", "synthetic");
    if (type == "synthetic") {
        BenchmarkSpec spec;
        spec.sigma_noise = objective.value("noise", spec.sigma_noise);
        spec.noise_free = objective.value("noise_free", spec.noise_free);
        spec.base_asymptote = objective.value("base_asymptote", spec.base_asymptote);
        spec.tau_base = objective.value("tau_base", spec.tau_base);
        spec.tau_scale = objective.value("tau_scale", spec.tau_scale);
        spec.seed = objective.contains("seed") ? objective.at("seed").get<std::uint64_t>() : seed;
        return std::make_unique<SyntheticRunner>(spec, space);
    }
    if (type == "subprocess") {
        const std::string command =
            worker_cmd.empty() ? objective.value("command", std::string{}) : worker_cmd;
        if (command.empty())
            throw std::invalid_argument(
                "subprocess objective needs a command (config \"command\" or --worker-cmd)");
        return std::make_unique<SubprocessRunner>(command, space,
                                                  objective.value("timeout_ms", 120000));
    }
    throw std::invalid_argument("unknown objective type '" + type + "'");
}

PocaiiParams pocaii_params_from_json(const json& algo, long long budget) {
    PocaiiParams p;
    p.total_budget = budget;
    p.delta = algo.value("delta", p.delta);
    p.interval = algo.value("interval", p.interval);
    p.n_search = algo.value("n_search", p.n_search);
    p.epsilon = algo.value("epsilon", p.epsilon);
    p.alpha = algo.value("alpha", p.alpha);
    p.gamma = algo.value("gamma", p.gamma);
    p.n_tpe_candidates = algo.value("n_tpe_candidates", p.n_tpe_candidates);
    p.uniform_mix = algo.value("uniform_mix", p.uniform_mix);
    p.parallel_workers = algo.value("parallel_workers", p.parallel_workers);
    if (algo.contains("arima")) {
        const json& a = algo.at("arima");
        if (!a.is_array() || a.size() != 3)
            throw std::invalid_argument("pocaii: arima must be [ar, diff, ma]");
        p.arima = ArimaOrder{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()};
    }
    if (algo.contains("eval_count")) {
        const int constant = algo.at("eval_count").get<int>();
        if (constant < 1) throw std::invalid_argument("pocaii: eval_count must be >= 1");
        p.eval_count = [constant](int) { return constant; };
    }
    return p;
}

RunReport execute_algorithm(const json& algo, const ExperimentConfig& config,
                            ObjectiveRunner& runner, std::uint64_t seed, RunHooks hooks) {
    const std::string name = algo.at("name");
    if (name == "pocaii") {
        PocaiiOptimizer optimizer(config.space, runner, pocaii_params_from_json(algo, config.budget),
                                  seed, std::move(hooks));
        return optimizer.run();
    }
    if (name == "random") {
        RandomSearchParams p;
        p.total_budget = config.budget;
        p.delta_eval = algo.value("delta_eval", 20LL);
        return run_random_search(config.space, runner, p, seed, std::move(hooks));
    }
    if (name == "hyperband") {
        HyperbandParams p;
        p.total_budget = config.budget;
        p.delta_min = algo.value("delta_min", 5LL);
        p.beta_max = algo.value("beta_max", 20LL);
        p.eta = algo.value("eta", 2);
        return run_hyperband(config.space, runner, p, seed, std::move(hooks));
    }
    if (name == "successive-halving") {
        SuccessiveHalvingParams p;
        p.total_budget = config.budget;
        p.n = algo.value("n", 8LL);
        p.delta_start = algo.value("delta_start", 5LL);
        p.beta_max = algo.value("beta_max", 20LL);
        p.eta = algo.value("eta", 2);
        return run_successive_halving(config.space, runner, p, seed, std::move(hooks));
    }
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

double trajectory_value(const RunReport& report, long long budget) {
    const auto& t = report.incumbent_trajectory;
    if (t.empty()) return -std::numeric_limits<double>::infinity();
    // before the first debit, carry the first value back so the report grid
    // stays dense even for coarse-fidelity algorithms
    double value = t.front().second;
    for (const auto& [spent, score] : t) {
        if (spent > budget) break;
        value = score;
    }
    return value;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

int cmd_run(const std::filesystem::path& config_path, const RunCommandOptions& options,
            std::ostream& out, std::ostream& err) {
    try {
        ExperimentConfig config = load_experiment_config(config_path);
        if (options.out) config.output = *options.out;
        const std::uint64_t seed =
            options.seed ? *options.seed : (config.seeds.empty() ? 1 : config.seeds.front());
        const json& algo = config.algorithms.front();
        const std::string name = algo.at("name");

        std::filesystem::create_directories(config.output);
        auto runner = make_runner(config.objective, config.space, seed, options.worker_cmd);

        const std::string run_id = run_label(algo) + "-seed" + std::to_string(seed);
        const std::filesystem::path log_path = config.output / (run_id + ".jsonl");
        TrialLogWriter writer(log_path, config.space, run_id, name, seed);
        writer.begin(resolved_experiment(config, algo, seed));

        RunHooks hooks = writer.hooks();
        if (options.pause_after_spend >= 0)
            hooks.stop_after_iteration = [limit = options.pause_after_spend](long long spent) {
                return spent >= limit;
            };

        const RunReport report = execute_algorithm(algo, config, *runner, seed, std::move(hooks));
        if (report.completed) writer.end(report);
        write_summary(out, report, log_path);
        write_summary_file(config.output / (run_id + ".summary.json"), report, log_path);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_compare(const std::filesystem::path& config_path, const CompareCommandOptions& options,
                std::ostream& out, std::ostream& err) {
    try {
        ExperimentConfig config = load_experiment_config(config_path);
        if (options.out) config.output = *options.out;
        if (config.algorithms.size() < 2)
            throw std::invalid_argument("compare needs at least two algorithms");
        if (config.seeds.size() < 2) throw std::invalid_argument("compare needs at least two seeds");
        std::filesystem::create_directories(config.output);

        const std::size_t n_algos = config.algorithms.size();
        const std::size_t n_seeds = config.seeds.size();

        std::vector<std::string> labels;
        for (const json& algo : config.algorithms) {
            std::string label = run_label(algo);
            int suffix = 2;
            while (std::find(labels.begin(), labels.end(), label) != labels.end())
                label = run_label(algo) + "-" + std::to_string(suffix++);
            labels.push_back(label);
        }

        struct Job {
            std::size_t algo;
            std::size_t seed;
        };
        std::vector<Job> jobs;
        for (std::size_t a = 0; a < n_algos; ++a)
            for (std::size_t s = 0; s < n_seeds; ++s) jobs.push_back({a, s});

        std::vector<std::vector<RunReport>> reports(n_algos, std::vector<RunReport>(n_seeds));
        std::atomic<std::size_t> next{0};
        std::mutex failure_mutex;
        std::string first_failure;

        auto one_run = [&](const Job& job) {
            const json& algo = config.algorithms[job.algo];
            const std::uint64_t seed = config.seeds[job.seed];
            auto runner = make_runner(config.objective, config.space, seed, options.worker_cmd);
            const std::string run_id = labels[job.algo] + "-seed" + std::to_string(seed);
            const std::filesystem::path log_path = config.output / (run_id + ".jsonl");
            TrialLogWriter writer(log_path, config.space, run_id, algo.at("name"), seed);
            writer.begin(resolved_experiment(config, algo, seed));
            RunReport report = execute_algorithm(algo, config, *runner, seed, writer.hooks());
            writer.end(report);
            reports[job.algo][job.seed] = std::move(report);
        };
        auto work = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    one_run(jobs[i]);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (first_failure.empty()) first_failure = e.what();
                }
            }
        };
        const int n_threads = std::clamp<int>(options.parallel, 1, static_cast<int>(jobs.size()));
        if (n_threads <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(n_threads));
            for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
            for (std::thread& t : pool) t.join();
        }
        if (!first_failure.empty()) throw std::runtime_error(first_failure);

        long long step = report_step(config.algorithms.front());
        // optional override lives next to the algorithms in the config file
        {
            std::ifstream in(config_path);
            json raw = json::parse(in);
            step = raw.value("report_step", step);
        }
        if (step < 1 || step > config.budget)
            throw std::invalid_argument("report_step must lie in [1, budget]");

        std::vector<long long> grid;
        for (long long b = step; b <= config.budget; b += step) grid.push_back(b);

        const std::filesystem::path traj_path = config.output / "trajectory.csv";
        std::ofstream traj(traj_path);
        if (!traj) throw std::runtime_error("cannot write " + traj_path.string());
        traj << "budget,algorithm,mean_score,stderr,n_seeds\n" << std::setprecision(12);
        for (long long b : grid)
            for (std::size_t a = 0; a < n_algos; ++a) {
                std::vector<double> scores(n_seeds);
                for (std::size_t s = 0; s < n_seeds; ++s)
                    scores[s] = trajectory_value(reports[a][s], b);
                const double mean = mean_of(scores);
                const double se = sample_stddev(scores) / std::sqrt(static_cast<double>(n_seeds));
                traj << b << "," << labels[a] << "," << mean << "," << se << "," << n_seeds
                     << "\n";
            }

        const std::filesystem::path ranks_path = config.output / "ranks.csv";
        std::ofstream ranks_csv(ranks_path);
        if (!ranks_csv) throw std::runtime_error("cannot write " + ranks_path.string());
        ranks_csv << "budget,algorithm,mean_rank\n" << std::setprecision(12);
        for (long long b : grid) {
            std::vector<double> rank_sum(n_algos, 0.0);
            for (std::size_t s = 0; s < n_seeds; ++s) {
                std::vector<double> scores(n_algos);
                for (std::size_t a = 0; a < n_algos; ++a)
                    scores[a] = trajectory_value(reports[a][s], b);
                const std::vector<double> r = average_ranks(scores);
                for (std::size_t a = 0; a < n_algos; ++a) rank_sum[a] += r[a];
            }
            for (std::size_t a = 0; a < n_algos; ++a)
                ranks_csv << b << "," << labels[a] << ","
                          << rank_sum[a] / static_cast<double>(n_seeds) << "\n";
        }

        out << "compared " << n_algos << " algorithms over " << n_seeds << " seeds, budget "
            << config.budget << "\n";
        out << std::setprecision(6);
        for (std::size_t a = 0; a < n_algos; ++a) {
            std::vector<double> finals(n_seeds);
            for (std::size_t s = 0; s < n_seeds; ++s)
                finals[s] = trajectory_value(reports[a][s], config.budget);
            out << "  " << labels[a] << ": final mean " << mean_of(finals) << " (stderr "
                << sample_stddev(finals) / std::sqrt(static_cast<double>(n_seeds)) << ")\n";
        }

        // paired one-sided sign tests: the reference entry against every other
        std::size_t reference = n_algos;
        for (std::size_t a = 0; a < n_algos; ++a)
            if (config.algorithms[a].at("name") == "pocaii") {
                reference = a;
                break;
            }
        if (reference < n_algos) {
            const std::filesystem::path sign_path = config.output / "sign_test.csv";
            std::ofstream sign(sign_path);
            if (!sign) throw std::runtime_error("cannot write " + sign_path.string());
            sign << "baseline,wins,losses,ties,p_value\n" << std::setprecision(12);
            for (std::size_t a = 0; a < n_algos; ++a) {
                if (a == reference) continue;
                int wins = 0, losses = 0, ties = 0;
                for (std::size_t s = 0; s < n_seeds; ++s) {
                    const double mine = trajectory_value(reports[reference][s], config.budget);
                    const double theirs = trajectory_value(reports[a][s], config.budget);
                    if (mine > theirs)
                        ++wins;
                    else if (mine < theirs)
                        ++losses;
                    else
                        ++ties;
                }
                const double p = binomial_sign_test_p(wins, wins + losses);
                sign << labels[a] << "," << wins << "," << losses << "," << ties << "," << p
                     << "\n";
                out << "  sign test " << labels[reference] << " > " << labels[a] << ": " << wins
                    << " wins / " << losses << " losses / " << ties << " ties, p = " << p << "\n";
            }
        }

        out << "wrote " << traj_path.string() << " and " << ranks_path.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_resume(const std::filesystem::path& log_path, const std::string& worker_cmd,
               std::ostream& out, std::ostream& err) {
    try {
        const ReplayedRun replayed = replay_trial_log(log_path);
        if (replayed.completed) {
            out << "run already completed; nothing to resume\n";
            return 0;
        }
        if (replayed.algorithm != "pocaii")
            throw std::invalid_argument("resume supports pocaii runs only; '" +
                                        replayed.algorithm + "' runs are cheap to rerun");

        const json& experiment = replayed.experiment;
        const SearchSpace space = space_from_json(require(experiment, "space", "begin record"));
        for (const auto& [record, consumed] : replayed.state.trials)
            if (record.config.values.size() != space.dimension())
                throw std::invalid_argument("log does not match its recorded search space");

        const long long budget = require(experiment, "budget", "begin record").get<long long>();
        const PocaiiParams params =
            pocaii_params_from_json(require(experiment, "algorithm", "begin record"), budget);
        auto runner = make_runner(require(experiment, "objective", "begin record"), space,
                                  replayed.seed, worker_cmd);

        truncate_trial_log(log_path, replayed.keep_lines);
        TrialLogWriter writer(log_path, space, replayed.run_id, replayed.algorithm, replayed.seed,
                              /*append=*/true);
        PocaiiOptimizer optimizer(space, *runner, params, replayed.seed, replayed.state,
                                  writer.hooks());
        const RunReport report = optimizer.run();
        if (report.completed) writer.end(report);
        write_summary(out, report, log_path);
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace pocaii
