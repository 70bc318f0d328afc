#include "pocaii/objective.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "pocaii/rng.hpp"

namespace pocaii {

namespace {
constexpr double kAsymptoteFloor = 0.01;
constexpr double kTauFloor = 0.5;

double spec_at(const std::vector<double>& v, std::size_t i, double fallback) {
    return i < v.size() ? v[i] : fallback;
}
}  // namespace

double synthetic_asymptote(const BenchmarkSpec& spec, const SearchSpace& space,
                           const Configuration& config) {
    const auto unit = to_unit(space, config);
    double a = spec.base_asymptote;
    std::size_t cont = 0;
    for (std::size_t j = 0; j < space.dimension(); ++j) {
        if (space.params[j].kind == ParamKind::categorical) {
            if (!spec.penalties.empty()) {
                const auto idx = static_cast<std::size_t>(unit[j]);
                a -= spec.penalties[idx % spec.penalties.size()];
            }
        } else {
            const double c = spec_at(spec.curvatures, cont, 0.25);
            const double o = spec_at(spec.optima, cont, 0.5);
            a -= c * (unit[j] - o) * (unit[j] - o);
            ++cont;
        }
    }
    return std::min(1.0, std::max(kAsymptoteFloor, a));
}

double synthetic_score(const BenchmarkSpec& spec, const SearchSpace& space,
                       const Configuration& config, long long budget) {
    if (budget < 1) throw std::invalid_argument("synthetic_score: budget must be >= 1");
    const auto unit = to_unit(space, config);
    double tau_u = 0.5;
    std::size_t cont = 0;
    for (std::size_t j = 0; j < space.dimension(); ++j) {
        if (space.params[j].kind == ParamKind::categorical) continue;
        if (cont == 1) tau_u = unit[j];
        ++cont;
    }
    const double tau = std::max(kTauFloor, spec.tau_base + spec.tau_scale * tau_u);
    const double a = synthetic_asymptote(spec, space, config);
    double score = a * (1.0 - std::exp(-static_cast<double>(budget) / tau));
    if (!spec.noise_free && spec.sigma_noise > 0.0) {
        Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(config.id),
                           static_cast<std::uint64_t>(budget));
        score += std::normal_distribution<double>{0.0, spec.sigma_noise}(rng);
    }
    return score;
}

SearchSpace reference_benchmark_space() {
    SearchSpace s;
    s.params.push_back(ParameterSpec::make_continuous("lambda1", 0.0, 1.0));
    s.params.push_back(ParameterSpec::make_continuous("lambda2", 0.0, 1.0));
    s.params.push_back(ParameterSpec::make_categorical("choice", {"A", "B", "C"}));
    return s;
}

SyntheticRunner::SyntheticRunner(BenchmarkSpec spec, SearchSpace space)
    : spec_(std::move(spec)), space_(std::move(space)) {
    if (auto err = validate(space_)) throw std::invalid_argument("SyntheticRunner: " + *err);
    if (spec_.sigma_noise < 0) throw std::invalid_argument("SyntheticRunner: negative noise");
}

EvalOutcome SyntheticRunner::evaluate(const EvaluationRequest& request) {
    if (request.interval < 1) return EvalOutcome::failure("interval must be >= 1");
    if (request.start < 0 || request.end <= request.start)
        return EvalOutcome::failure("bad budget window");
    if (request.start % request.interval != 0 || request.end % request.interval != 0)
        return EvalOutcome::failure("budget window off the measurement grid");
    if (!contains(space_, request.config))
        return EvalOutcome::failure("configuration outside the search space");

    MeasurementBatch batch;
    for (long long b = request.start + request.interval; b <= request.end; b += request.interval)
        batch.measurements.push_back({b, synthetic_score(spec_, space_, request.config, b)});
    batch.checkpoint = "b" + std::to_string(request.end);
    return EvalOutcome::success(std::move(batch));
}

std::string check_measurement_grid(const MeasurementBatch& batch,
                                   const EvaluationRequest& request) {
    const long long n = (request.end - request.start) / request.interval;
    if (static_cast<long long>(batch.measurements.size()) != n)
        return "expected " + std::to_string(n) + " measurements, got " +
               std::to_string(batch.measurements.size());
    for (long long i = 0; i < n; ++i) {
        const auto& m = batch.measurements[i];
        const long long want = request.start + request.interval * (i + 1);
        if (m.budget != want)
            return "budget grid mismatch at index " + std::to_string(i) + ": expected " +
                   std::to_string(want) + ", got " + std::to_string(m.budget);
        if (!std::isfinite(m.score))
            return "non-finite score at budget " + std::to_string(m.budget);
    }
    return {};
}

std::string encode_request(const EvaluationRequest& request, const SearchSpace& space) {
    if (request.config.values.size() != space.dimension())
        throw std::invalid_argument("encode_request: configuration arity mismatch");
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t j = 0; j < space.dimension(); ++j) {
        const auto& p = space.params[j];
        const double v = request.config.values[j];
        switch (p.kind) {
            case ParamKind::continuous: params[p.name] = v; break;
            case ParamKind::integer: params[p.name] = static_cast<long long>(v); break;
            case ParamKind::categorical: params[p.name] = p.choices.at(static_cast<int>(v)); break;
        }
    }
    nlohmann::json j{{"id", request.config_id}, {"params", std::move(params)},
                     {"start", request.start},  {"end", request.end},
                     {"interval", request.interval}, {"checkpoint", request.checkpoint}};
    return j.dump();
}

EvalOutcome decode_response(const std::string& line, const EvaluationRequest& request) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        return EvalOutcome::failure(std::string("malformed response: ") + e.what());
    }
    if (!j.is_object()) return EvalOutcome::failure("malformed response: not a JSON object");
    if (!j.contains("id") || !j["id"].is_number_integer())
        return EvalOutcome::failure("malformed response: missing id");
    if (j["id"].get<long long>() != request.config_id)
        return EvalOutcome::failure("response id " + std::to_string(j["id"].get<long long>()) +
                                    " does not match request id " +
                                    std::to_string(request.config_id));
    if (j.contains("error"))
        return EvalOutcome::failure("worker error: " +
                                    (j["error"].is_string() ? j["error"].get<std::string>()
                                                            : j["error"].dump()));
    if (!j.contains("measurements") || !j["measurements"].is_array())
        return EvalOutcome::failure("malformed response: missing measurements");

    MeasurementBatch batch;
    for (const auto& item : j["measurements"]) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number())
            return EvalOutcome::failure("malformed response: measurement must be [budget, score]");
        batch.measurements.push_back({item[0].get<long long>(), item[1].get<double>()});
    }
    if (j.contains("checkpoint") && j["checkpoint"].is_string())
        batch.checkpoint = j["checkpoint"].get<std::string>();

    if (auto err = check_measurement_grid(batch, request); !err.empty())
        return EvalOutcome::failure(err);
    return EvalOutcome::success(std::move(batch));
}

}  // namespace pocaii
