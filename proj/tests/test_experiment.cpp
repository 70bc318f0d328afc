#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocaii/experiment.hpp"
#include "pocaii/trial_log.hpp"

using namespace pocaii;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "pocaii-harness-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    fs::path path = dir / name;
    std::ofstream out(path);
    out << text;
    return path;
}

fs::path write_config(const fs::path& dir, const json& config) {
    return write_file(dir, "config.json", config.dump(2) + "\n");
}

json base_config(long long budget) {
    return json{{"space", "reference"},
                {"objective", {{"type", "synthetic"}, {"noise", 0.01}}},
                {"budget", budget},
                {"seeds", {7}},
                {"algorithm", {{"name", "pocaii"}, {"delta", 5}, {"n_search", 3}}}};
}

//: log lines with the wall-clock stamp stripped, for run-equivalence checks
std::vector<std::string> log_lines_no_ts(const fs::path& path) {
    std::vector<std::string> lines;
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string raw;
    while (std::getline(in, raw)) {
        json j = json::parse(raw);
        j.erase("ts");
        lines.push_back(j.dump());
    }
    return lines;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cmd(const fs::path& config, const RunCommandOptions& options) {
    std::ostringstream out, err;
    const int code = cmd_run(config, options, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("search space declarations round-trip through json") {
    auto ref = space_from_json(json("reference"));
    REQUIRE(ref.dimension() == 3);
    CHECK(ref.params[0].name == "lambda1");
    CHECK(ref.params[2].kind == ParamKind::categorical);

    json schema = json::array({{{"name", "lr"},
                                {"type", "continuous"},
                                {"low", 1e-4},
                                {"high", 1.0},
                                {"log", true}},
                               {{"name", "width"}, {"type", "integer"}, {"low", 16}, {"high", 256}},
                               {{"name", "act"},
                                {"type", "categorical"},
                                {"choices", {"relu", "tanh"}}}});
    auto space = space_from_json(schema);
    REQUIRE(space.dimension() == 3);
    CHECK(space.params[0].log_scale);
    CHECK(space.params[1].kind == ParamKind::integer);
    CHECK(space.params[2].choices == std::vector<std::string>{"relu", "tanh"});
    CHECK(space_from_json(space_to_json(space)).params[0].high == 1.0);

    CHECK_THROWS_WITH_AS(space_from_json(json("mnist")), doctest::Contains("unknown preset"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(space_from_json(json::object()), doctest::Contains("parameter array"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(space_from_json(json::array({{{"name", "x"}, {"type", "spline"}}})),
                         doctest::Contains("unknown type"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        space_from_json(json::array({{{"name", "x"}, {"type", "continuous"}, {"high", 1.0}}})),
        doctest::Contains("missing 'low'"), std::invalid_argument);
    // structural validation still applies after parsing
    CHECK_THROWS_AS(space_from_json(json::array(
                        {{{"name", "x"}, {"type", "continuous"}, {"low", 2.0}, {"high", 1.0}}})),
                    std::invalid_argument);
}

TEST_CASE("experiment configs are validated on load") {
    auto dir = fresh_dir("config-validation");

    auto path = write_config(dir, base_config(60));
    auto config = load_experiment_config(path);
    CHECK(config.budget == 60);
    CHECK(config.seeds == std::vector<std::uint64_t>{7});
    REQUIRE(config.algorithms.size() == 1);
    CHECK(config.algorithms[0].at("name") == "pocaii");

    auto expect_error = [&](json broken, const char* needle) {
        auto p = write_config(dir, broken);
        CHECK_THROWS_WITH_AS(load_experiment_config(p), doctest::Contains(needle),
                             std::invalid_argument);
    };

    json no_budget = base_config(60);
    no_budget.erase("budget");
    expect_error(no_budget, "missing 'budget'");

    expect_error(base_config(0), "budget must be positive");

    json dup_seeds = base_config(60);
    dup_seeds["seeds"] = {3, 5, 3};
    expect_error(dup_seeds, "seeds must be distinct");

    json no_algo = base_config(60);
    no_algo.erase("algorithm");
    expect_error(no_algo, "needs 'algorithm'");

    json bad_algo = base_config(60);
    bad_algo["algorithm"] = {{"name", "simulated-annealing"}};
    expect_error(bad_algo, "unknown algorithm");

    json wrong_type = base_config(60);
    wrong_type["budget"] = "sixty";
    expect_error(wrong_type, "type must be number");

    write_file(dir, "broken.json", "{ not json");
    CHECK_THROWS_AS(load_experiment_config(dir / "broken.json"), std::invalid_argument);
    CHECK_THROWS_AS(load_experiment_config(dir / "absent.json"), std::runtime_error);
}

TEST_CASE("algorithm blocks map onto scheduler knobs") {
    json algo{{"name", "pocaii"}, {"delta", 10},    {"interval", 2},
              {"n_search", 7},    {"alpha", 1.001}, {"epsilon", 0.1},
              {"gamma", 0.25},    {"uniform_mix", true}, {"arima", {1, 1, 1}},
              {"eval_count", 3}};
    auto p = pocaii_params_from_json(algo, 500);
    CHECK(p.total_budget == 500);
    CHECK(p.delta == 10);
    CHECK(p.interval == 2);
    CHECK(p.n_search == 7);
    CHECK(p.alpha == 1.001);
    CHECK(p.epsilon == 0.1);
    CHECK(p.gamma == 0.25);
    CHECK(p.uniform_mix);
    CHECK(p.arima.ar == 1);
    CHECK(p.arima.ma == 1);
    CHECK(p.eval_count_of(1) == 3);
    CHECK(p.eval_count_of(9) == 3);  // constant override replaces the default k

    auto defaults = pocaii_params_from_json(json{{"name", "pocaii"}}, 100);
    CHECK(defaults.delta == 5);
    CHECK(defaults.eval_count_of(4) == 4);

    json bad_arima = algo;
    bad_arima["arima"] = {1, 1};
    CHECK_THROWS_WITH_AS(pocaii_params_from_json(bad_arima, 500),
                         doctest::Contains("arima must be"), std::invalid_argument);
    json bad_evals = algo;
    bad_evals["eval_count"] = 0;
    CHECK_THROWS_WITH_AS(pocaii_params_from_json(bad_evals, 500),
                         doctest::Contains("eval_count"), std::invalid_argument);
}

TEST_CASE("objective factory") {
    auto space = reference_benchmark_space();
    auto runner = make_runner(json{{"type", "synthetic"}, {"noise_free", true}}, space, 3, "");
    CHECK(runner->resumable());

    CHECK_THROWS_WITH_AS(make_runner(json{{"type", "subprocess"}}, space, 3, ""),
                         doctest::Contains("needs a command"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(make_runner(json{{"type", "oracle"}}, space, 3, ""),
                         doctest::Contains("unknown objective type"), std::invalid_argument);
}

TEST_CASE("rank and trajectory helpers") {
    SUBCASE("competition ranks average across ties") {
        auto r = average_ranks({0.3, 0.9, 0.9, 0.1});
        CHECK(r == std::vector<double>{3.0, 1.5, 1.5, 4.0});
        CHECK(average_ranks({1.0, 1.0, 1.0, 1.0}) == std::vector<double>{2.5, 2.5, 2.5, 2.5});

        // rank mass is conserved no matter how values tie
        for (auto values : {std::vector<double>{5, 5, 2, 2, 2, 1}, {9, 8, 7}, {4, 4}}) {
            auto ranks = average_ranks(values);
            double sum = 0.0;
            for (double v : ranks) sum += v;
            const double n = static_cast<double>(values.size());
            CHECK(sum == doctest::Approx(n * (n + 1) / 2));
        }
    }

    SUBCASE("trajectory lookup is a right-continuous step with backfill") {
        RunReport report;
        report.incumbent_trajectory = {{5, 0.2}, {10, 0.5}, {20, 0.6}};
        CHECK(trajectory_value(report, 1) == 0.2);  // before the first debit
        CHECK(trajectory_value(report, 5) == 0.2);
        CHECK(trajectory_value(report, 9) == 0.2);
        CHECK(trajectory_value(report, 10) == 0.5);
        CHECK(trajectory_value(report, 19) == 0.5);
        CHECK(trajectory_value(report, 20) == 0.6);
        CHECK(trajectory_value(report, 1000) == 0.6);

        RunReport empty;
        CHECK(trajectory_value(empty, 10) == -std::numeric_limits<double>::infinity());
    }
}

TEST_CASE("single runs write a log and a summary") {
    auto dir = fresh_dir("run-once");
    auto config = write_config(dir, base_config(60));

    RunCommandOptions options;
    options.out = dir / "out";
    auto result = run_cmd(config, options);
    CHECK(result.exit_code == 0);
    CHECK(result.err.empty());
    CHECK(result.out.find("algorithm:      pocaii") != std::string::npos);
    CHECK(result.out.find("spent:          60/60") != std::string::npos);

    const fs::path log = *options.out / "pocaii-seed7.jsonl";
    REQUIRE(fs::exists(log));
    REQUIRE(fs::exists(*options.out / "pocaii-seed7.summary.json"));

    json summary = json::parse(slurp(*options.out / "pocaii-seed7.summary.json"));
    CHECK(summary.at("spent") == 60);
    CHECK(summary.at("budget") == 60);
    CHECK(summary.at("completed") == true);
    CHECK(summary.at("seed") == 7);
    CHECK(summary.at("spent").get<long long>() ==
          summary.at("search_spend").get<long long>() +
              summary.at("eval_spend").get<long long>() +
              summary.at("flush_spend").get<long long>());

    SUBCASE("the same invocation reproduces the log except for timestamps") {
        RunCommandOptions again = options;
        again.out = dir / "out2";
        REQUIRE(run_cmd(config, again).exit_code == 0);
        CHECK(log_lines_no_ts(log) == log_lines_no_ts(*again.out / "pocaii-seed7.jsonl"));
    }

    SUBCASE("an explicit seed overrides the config") {
        RunCommandOptions other = options;
        other.out = dir / "out3";
        other.seed = 99;
        REQUIRE(run_cmd(config, other).exit_code == 0);
        CHECK(fs::exists(*other.out / "pocaii-seed99.jsonl"));
        CHECK(log_lines_no_ts(log) != log_lines_no_ts(*other.out / "pocaii-seed99.jsonl"));
    }

    SUBCASE("infeasible budgets exit with a diagnostic") {
        auto bad = write_config(fresh_dir("run-bad"), base_config(4));
        auto failed = run_cmd(bad, options);
        CHECK(failed.exit_code == 2);
        CHECK(failed.out.empty());
        CHECK(failed.err.find("error:") != std::string::npos);
        CHECK(failed.err.find("infeasible budget") != std::string::npos);
    }
}

TEST_CASE("comparisons aggregate trajectories ranks and sign tests") {
    auto dir = fresh_dir("compare");
    json config = base_config(60);
    config.erase("algorithm");
    config["seeds"] = {1, 2, 3};
    config["report_step"] = 20;
    config["algorithms"] = json::array({{{"name", "pocaii"}, {"delta", 5}, {"n_search", 3}},
                                        {{"name", "random"}, {"delta_eval", 10}}});
    auto path = write_config(dir, config);

    CompareCommandOptions options;
    options.out = dir / "out";
    std::ostringstream out, err;
    REQUIRE(cmd_compare(path, options, out, err) == 0);
    CHECK(err.str().empty());
    CHECK(out.str().find("compared 2 algorithms over 3 seeds") != std::string::npos);

    auto traj = read_csv(*options.out / "trajectory.csv");
    REQUIRE(traj.size() == 1 + 3 * 2);  // header + 3 gridpoints x 2 algorithms
    CHECK(traj[0] == std::vector<std::string>{"budget", "algorithm", "mean_score", "stderr",
                                              "n_seeds"});
    for (std::size_t i = 1; i < traj.size(); ++i) {
        REQUIRE(traj[i].size() == 5);
        CHECK(traj[i][4] == "3");
        CHECK(std::stod(traj[i][3]) >= 0.0);
    }
    // scores are running maxima, so gridpoint means never decrease
    for (const std::string& label : {std::string("pocaii"), std::string("random")}) {
        double prev = -1e300;
        for (std::size_t i = 1; i < traj.size(); ++i)
            if (traj[i][1] == label) {
                const double mean = std::stod(traj[i][2]);
                CHECK(mean >= prev);
                prev = mean;
            }
    }

    auto ranks = read_csv(*options.out / "ranks.csv");
    REQUIRE(ranks.size() == 1 + 3 * 2);
    for (const std::string& budget : {std::string("20"), std::string("40"), std::string("60")}) {
        double sum = 0.0;
        for (std::size_t i = 1; i < ranks.size(); ++i)
            if (ranks[i][0] == budget) sum += std::stod(ranks[i][2]);
        CHECK(sum == doctest::Approx(3.0));  // 1 + 2 shared across two entries
    }

    auto sign = read_csv(*options.out / "sign_test.csv");
    REQUIRE(sign.size() == 2);
    CHECK(sign[0] == std::vector<std::string>{"baseline", "wins", "losses", "ties", "p_value"});
    CHECK(sign[1][0] == "random");
    CHECK(std::stoi(sign[1][1]) + std::stoi(sign[1][2]) + std::stoi(sign[1][3]) == 3);
    const double p = std::stod(sign[1][4]);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);

    SUBCASE("parallel dispatch reproduces the serial tables") {
        CompareCommandOptions par = options;
        par.out = dir / "out-parallel";
        par.parallel = 3;
        std::ostringstream pout, perr;
        REQUIRE(cmd_compare(path, par, pout, perr) == 0);
        CHECK(slurp(*par.out / "trajectory.csv") == slurp(*options.out / "trajectory.csv"));
        CHECK(slurp(*par.out / "ranks.csv") == slurp(*options.out / "ranks.csv"));
    }
}

TEST_CASE("identical entries tie at rank 1.5 everywhere") {
    auto dir = fresh_dir("compare-twins");
    json config = base_config(40);
    config.erase("algorithm");
    config["seeds"] = {4, 5};
    config["report_step"] = 20;
    config["algorithms"] = json::array(
        {{{"name", "random"}, {"delta_eval", 10}}, {{"name", "random"}, {"delta_eval", 10}}});
    auto path = write_config(dir, config);

    CompareCommandOptions options;
    options.out = dir / "out";
    std::ostringstream out, err;
    REQUIRE(cmd_compare(path, options, out, err) == 0);

    auto ranks = read_csv(*options.out / "ranks.csv");
    REQUIRE(ranks.size() == 1 + 2 * 2);
    std::vector<std::string> labels;
    for (std::size_t i = 1; i < ranks.size(); ++i) {
        labels.push_back(ranks[i][1]);
        CHECK(std::stod(ranks[i][2]) == doctest::Approx(1.5));
    }
    CHECK(std::count(labels.begin(), labels.end(), "random") == 2);
    CHECK(std::count(labels.begin(), labels.end(), "random-2") == 2);  // deduped label

    // no reference entry, so no sign-test table
    CHECK(!fs::exists(*options.out / "sign_test.csv"));

    SUBCASE("a comparison needs two algorithms and two seeds") {
        json solo = config;
        solo["algorithms"] = json::array({{{"name", "random"}}, {{"name", "random"}}});
        solo["seeds"] = {4};
        std::ostringstream o, e;
        CHECK(cmd_compare(write_config(dir, solo), options, o, e) == 2);
        CHECK(e.str().find("at least two seeds") != std::string::npos);

        json one_algo = config;
        one_algo["algorithms"] = json::array({{{"name", "random"}}});
        CHECK(cmd_compare(write_config(dir, one_algo), options, o, e) == 2);
        CHECK(e.str().find("at least two algorithms") != std::string::npos);
    }
}

TEST_CASE("trial logs replay to the recorded state") {
    auto dir = fresh_dir("replay");
    auto config = write_config(dir, base_config(60));
    RunCommandOptions options;
    options.out = dir / "out";
    REQUIRE(run_cmd(config, options).exit_code == 0);
    const fs::path log = *options.out / "pocaii-seed7.jsonl";

    auto replayed = replay_trial_log(log);
    CHECK(replayed.completed);
    CHECK(replayed.algorithm == "pocaii");
    CHECK(replayed.seed == 7);
    CHECK(replayed.run_id == "pocaii-seed7");
    CHECK(replayed.spent == 60);
    CHECK(replayed.experiment.at("budget") == 60);
    CHECK(replayed.experiment.at("algorithm").at("name") == "pocaii");
    // the synthetic noise stream is pinned into the log so a resume replays it
    CHECK(replayed.experiment.at("objective").at("seed") == 7);

    json summary = json::parse(slurp(*options.out / "pocaii-seed7.summary.json"));
    CHECK(static_cast<int>(replayed.state.trials.size()) == summary.at("configurations"));
    CHECK(replayed.state.incumbent_score ==
          doctest::Approx(summary.at("incumbent_score").get<double>()));
    CHECK(replayed.state.incumbent_id == summary.at("incumbent_id"));
    long long consumed = 0;
    for (const auto& [record, used] : replayed.state.trials) consumed += used;
    CHECK(consumed == 60);

    SUBCASE("malformed records are rejected by line number") {
        json begin{{"event", "begin"}, {"experiment", json::object()},
                   {"algorithm", "pocaii"},  {"run", "x"},
                   {"seed", 1}};

        auto expect = [&](const std::string& name, const std::string& body, const char* needle) {
            auto p = write_file(dir, name, body);
            CHECK_THROWS_WITH_AS(replay_trial_log(p), doctest::Contains(needle),
                                 std::runtime_error);
        };

        expect("empty.jsonl", "", "missing begin record");
        expect("garbage.jsonl", begin.dump() + "\n{ nope\n", "line 2: not valid JSON");
        expect("headless.jsonl", json{{"event", "sampled"}}.dump() + "\n",
               "first record must be a begin record");

        // a closing evaluation marker keeps the bad record inside the
        // resumable prefix; records past the last one are skipped, not parsed
        const std::string closer =
            json{{"event", "phase_end"}, {"iteration", 1}, {"phase", "evaluation"}, {"spent", 5}}
                .dump() +
            "\n";

        json sampled{{"event", "sampled"}, {"config", 0},       {"iteration", 1},
                     {"debit", 5},         {"spent", 7},        {"score", 0.5},
                     {"incumbent", 0.5},   {"incumbent_id", 0}, {"values", {0.1, 0.2, 0.0}}};
        expect("drift.jsonl", begin.dump() + "\n" + sampled.dump() + "\n" + closer,
               "line 2: cumulative spent mismatch");

        json out_of_order = sampled;
        out_of_order["spent"] = 5;
        out_of_order["config"] = 3;
        expect("ids.jsonl", begin.dump() + "\n" + out_of_order.dump() + "\n" + closer,
               "consecutive config ids");

        expect("alien.jsonl", begin.dump() + "\n" + json{{"event", "renamed"}}.dump() + "\n" + closer,
               "unknown event 'renamed'");
    }

    SUBCASE("truncation keeps exactly the requested prefix") {
        auto p = write_file(dir, "prefix.jsonl", "a\nb\nc\nd\ne\n");
        truncate_trial_log(p, 2);
        CHECK(slurp(p) == "a\nb\n");
    }
}

TEST_CASE("interrupted runs resume into the identical log") {
    auto dir = fresh_dir("resume");
    json config_json = base_config(200);
    config_json["algorithm"] = {{"name", "pocaii"}, {"delta", 5}, {"n_search", 5}};
    auto config = write_config(dir, config_json);

    // the reference: one uninterrupted run
    RunCommandOptions full;
    full.out = dir / "full";
    REQUIRE(run_cmd(config, full).exit_code == 0);

    // pause partway through, then pick the run back up from its log
    RunCommandOptions paused;
    paused.out = dir / "paused";
    paused.pause_after_spend = 80;
    auto first_leg = run_cmd(config, paused);
    CHECK(first_leg.exit_code == 0);
    CHECK(first_leg.out.find("paused before the budget was exhausted") != std::string::npos);

    const fs::path log = *paused.out / "pocaii-seed7.jsonl";
    auto midway = replay_trial_log(log);
    CHECK(!midway.completed);
    CHECK(midway.spent >= 80);
    CHECK(midway.spent < 200);

    std::ostringstream out, err;
    REQUIRE(cmd_resume(log, "", out, err) == 0);
    CHECK(err.str().empty());
    CHECK(out.str().find("spent:          200/200") != std::string::npos);

    CHECK(log_lines_no_ts(log) == log_lines_no_ts(*full.out / "pocaii-seed7.jsonl"));

    SUBCASE("a finished run has nothing to resume") {
        std::ostringstream o, e;
        CHECK(cmd_resume(*full.out / "pocaii-seed7.jsonl", "", o, e) == 0);
        CHECK(o.str().find("nothing to resume") != std::string::npos);
    }

    SUBCASE("only the adaptive scheduler supports resuming") {
        json begin{{"event", "begin"}, {"experiment", json::object()},
                   {"algorithm", "random"},  {"run", "r"},
                   {"seed", 2}};
        auto p = write_file(dir, "random.jsonl", begin.dump() + "\n");
        std::ostringstream o, e;
        CHECK(cmd_resume(p, "", o, e) == 2);
        CHECK(e.str().find("pocaii runs only") != std::string::npos);
    }
}
