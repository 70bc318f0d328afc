#include "pocaii/trial_log.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pocaii {

namespace {

using nlohmann::json;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

json params_json(const SearchSpace& space, const Configuration& c) {
    json out = json::object();
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        const ParameterSpec& p = space.params[i];
        const double v = c.values.at(i);
        switch (p.kind) {
            case ParamKind::continuous:
                out[p.name] = v;
                break;
            case ParamKind::integer:
                out[p.name] = static_cast<std::int64_t>(std::llround(v));
                break;
            case ParamKind::categorical:
                out[p.name] = p.choices.at(static_cast<std::size_t>(std::llround(v)));
                break;
        }
    }
    return out;
}

json score_json(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;  // JSON has no infinities; null marks "no score yet"
}

double score_from_json(const json& j) {
    if (j.is_null()) return -std::numeric_limits<double>::infinity();
    return j.get<double>();
}

std::optional<TrialEventKind> kind_from_string(const std::string& s) {
    if (s == "sampled") return TrialEventKind::sampled;
    if (s == "trained") return TrialEventKind::trained;
    if (s == "selected") return TrialEventKind::selected;
    if (s == "flushed") return TrialEventKind::flushed;
    if (s == "failed") return TrialEventKind::failed;
    return std::nullopt;
}

}  // namespace

TrialLogWriter::TrialLogWriter(const std::filesystem::path& path, SearchSpace space,
                               std::string run_id, std::string algorithm, std::uint64_t seed,
                               bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc),
      space_(std::move(space)),
      run_id_(std::move(run_id)),
      algorithm_(std::move(algorithm)),
      seed_(seed) {
    if (!out_) throw std::runtime_error("cannot open trial log: " + path.string());
}

void TrialLogWriter::write(json line) {
    line["run"] = run_id_;
    line["seed"] = seed_;
    line["algorithm"] = algorithm_;
    line["ts"] = now_ms();
    out_ << line.dump() << '\n';
    out_.flush();  // crashes lose at most the line being written
}

void TrialLogWriter::begin(json experiment) {
    write(json{{"event", "begin"}, {"experiment", std::move(experiment)}});
}

void TrialLogWriter::event(const TrialEvent& ev) {
    json line{
        {"event", to_string(ev.kind)},   {"config", ev.config_id},
        {"iteration", ev.iteration},     {"debit", ev.debit},
        {"spent", ev.cumulative_spent},  {"score", score_json(ev.latest_score)},
        {"incumbent", score_json(ev.incumbent_score)}, {"incumbent_id", ev.incumbent_id},
    };
    if (ev.kind == TrialEventKind::failed) {
        line["during"] = to_string(ev.requested);
        line["diagnostic"] = ev.diagnostic;
    }
    if (!ev.measurements.empty()) {
        json ms = json::array();
        for (const Measurement& m : ev.measurements) ms.push_back(json::array({m.budget, m.score}));
        line["measurements"] = std::move(ms);
        line["checkpoint"] = ev.checkpoint;
    }
    if (ev.params) {
        line["params"] = params_json(space_, *ev.params);
        line["values"] = ev.params->values;
    }
    write(std::move(line));
}

void TrialLogWriter::phase_end(int iteration, const std::string& phase, long long spent) {
    write(json{
        {"event", "phase_end"}, {"iteration", iteration}, {"phase", phase}, {"spent", spent}});
}

void TrialLogWriter::end(const RunReport& report) {
    write(json{{"event", "end"},
               {"spent", report.spent},
               {"iterations", report.iterations},
               {"configs", report.search_config_count},
               {"incumbent", score_json(report.incumbent_score)},
               {"incumbent_id", report.incumbent_id}});
}

RunHooks TrialLogWriter::hooks() {
    RunHooks h;
    h.on_event = [this](const TrialEvent& ev) { event(ev); };
    h.on_phase_end = [this](int iteration, const std::string& phase, long long spent) {
        phase_end(iteration, phase, spent);
    };
    return h;
}

ReplayedRun replay_trial_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trial log: " + path.string());

    std::size_t lineno = 0;
    auto fail = [&lineno](const std::string& msg) {
        return std::runtime_error("trial log line " + std::to_string(lineno) + ": " + msg);
    };

    std::vector<json> lines;
    std::string raw;
    while (std::getline(in, raw)) {
        ++lineno;
        json j = json::parse(raw, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) throw fail("not valid JSON");
        if (!j.is_object() || !j.contains("event") || !j.at("event").is_string())
            throw fail("record has no event field");
        lines.push_back(std::move(j));
    }
    lineno = 1;
    if (lines.empty()) throw fail("missing begin record");

    ReplayedRun run;
    const json& head = lines.front();
    if (head.at("event") != "begin" || !head.contains("experiment"))
        throw fail("first record must be a begin record with the experiment");
    run.experiment = head.at("experiment");
    run.run_id = head.value("run", std::string{});
    run.algorithm = head.value("algorithm", std::string{});
    run.seed = head.value("seed", std::uint64_t{0});

    // resumable prefix: everything up to the last completed evaluation phase
    run.keep_lines = 1;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const json& j = lines[i];
        if (j.at("event") == "end") run.completed = true;
        if (j.at("event") == "phase_end" && j.value("phase", std::string{}) == "evaluation")
            run.keep_lines = i + 1;
    }
    if (run.completed) run.keep_lines = lines.size();

    std::vector<std::pair<TrialRecord, long long>> trials;
    std::array<long long, 5> spends{};
    long long prev_spent = 0;

    for (std::size_t i = 1; i < run.keep_lines; ++i) {
        lineno = i + 1;
        const json& j = lines[i];
        const std::string ev = j.at("event");
        if (ev == "begin") throw fail("duplicate begin record");
        if (ev == "end") continue;
        if (ev == "phase_end") {
            if (!j.contains("iteration") || !j.at("iteration").is_number_integer())
                throw fail("phase_end without iteration");
            if (j.value("phase", std::string{}) == "evaluation")
                run.state.completed_iterations = j.at("iteration").get<int>();
            continue;
        }

        const auto kind = kind_from_string(ev);
        if (!kind) throw fail("unknown event '" + ev + "'");
        for (const char* key : {"config", "debit", "spent"})
            if (!j.contains(key) || !j.at(key).is_number_integer())
                throw fail(std::string("missing integer field '") + key + "'");

        const long long id = j.at("config").get<long long>();
        const long long debit = j.at("debit").get<long long>();
        const long long spent = j.at("spent").get<long long>();
        if (debit <= 0) throw fail("debit must be positive");
        if (spent != prev_spent + debit) throw fail("cumulative spent mismatch");
        prev_spent = spent;

        if (*kind == TrialEventKind::sampled) {
            if (id != static_cast<long long>(trials.size()))
                throw fail("sampled records must introduce consecutive config ids");
            if (!j.contains("values") || !j.at("values").is_array())
                throw fail("sampled record without values");
            TrialRecord r;
            r.config.id = id;
            for (const json& v : j.at("values")) {
                if (!v.is_number()) throw fail("values must be numeric");
                r.config.values.push_back(v.get<double>());
            }
            trials.emplace_back(std::move(r), 0);
        }
        if (id < 0 || id >= static_cast<long long>(trials.size()))
            throw fail("event for unknown config id");

        auto& [record, consumed] = trials[static_cast<std::size_t>(id)];
        if (j.contains("measurements")) {
            if (!j.at("measurements").is_array()) throw fail("measurements must be an array");
            const long long start = record.series.last_budget();
            bool first = true;
            for (const json& m : j.at("measurements")) {
                if (!m.is_array() || m.size() != 2 || !m.at(0).is_number_integer() ||
                    !m.at(1).is_number())
                    throw fail("measurements must be [budget, score] pairs");
                if (first && record.series.empty()) {
                    const long long b = m.at(0).get<long long>();
                    if (b <= start) throw fail("measurement budgets must advance");
                    record.series.interval = b - start;
                }
                first = false;
                record.series.scores.push_back(m.at(1).get<double>());
            }
            record.checkpoint = j.value("checkpoint", std::string{});
        }
        if (*kind == TrialEventKind::failed) {
            record.failed = true;
            record.active = false;
        }
        consumed += debit;
        const TrialEventKind charged =
            *kind == TrialEventKind::failed
                ? kind_from_string(j.value("during", std::string{"failed"}))
                      .value_or(TrialEventKind::failed)
                : *kind;
        spends[static_cast<std::size_t>(charged)] += debit;

        if (!j.contains("incumbent")) throw fail("debit record without incumbent");
        run.state.incumbent_score = score_from_json(j.at("incumbent"));
        run.state.incumbent_id = j.value("incumbent_id", static_cast<long long>(-1));
        run.state.trajectory.emplace_back(spent, run.state.incumbent_score);
    }

    run.spent = prev_spent;
    run.state.trials = std::move(trials);
    for (std::size_t k = 0; k < spends.size(); ++k)
        if (spends[k] != 0)
            run.state.spends.emplace_back(static_cast<TrialEventKind>(k), spends[k]);
    return run;
}

void truncate_trial_log(const std::filesystem::path& path, std::size_t keep_lines) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trial log: " + path.string());
    std::string kept;
    std::string raw;
    for (std::size_t i = 0; i < keep_lines && std::getline(in, raw); ++i) {
        kept += raw;
        kept += '\n';
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot rewrite trial log: " + path.string());
    out << kept;
}

}  // namespace pocaii
