#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocaii/search_space.hpp"

namespace pocaii {

//! Train one configuration from start to end budget units, reporting a score
//! every `interval` units. start/end are multiples of interval; start may be
//! nonzero only when continuing from `checkpoint`.
struct EvaluationRequest {
    long long config_id = -1;
    Configuration config;
    long long start = 0;
    long long end = 0;
    int interval = 1;
    std::string checkpoint;
};

struct Measurement {
    long long budget = 0;
    double score = 0.0;
};

struct MeasurementBatch {
    std::vector<Measurement> measurements;  // at start+interval, ..., end
    std::string checkpoint;
};

struct EvalOutcome {
    bool ok = false;
    MeasurementBatch batch;
    std::string diagnostic;  // set when !ok

    static EvalOutcome success(MeasurementBatch b) { return {true, std::move(b), {}}; }
    static EvalOutcome failure(std::string why) { return {false, {}, std::move(why)}; }
};

class ObjectiveRunner {
  public:
    virtual ~ObjectiveRunner() = default;
    virtual EvalOutcome evaluate(const EvaluationRequest& request) = 0;
    //! continuing from a checkpoint costs only the incremental budget
    virtual bool resumable() const { return false; }
    //! evaluate() may be called concurrently for distinct configurations
    virtual bool concurrent_safe() const { return false; }
};

//! Saturating synthetic learning curves: score(beta) = a * (1 - exp(-beta/tau))
//! plus optional Gaussian noise drawn deterministically per (config id, budget).
//! The asymptote a peaks at `optima` in unit space and drops per categorical
//! penalty; tau = tau_base + tau_scale * (unit value of the second
//! non-categorical dimension, 0.5 when absent).
struct BenchmarkSpec {
    double base_asymptote = 0.95;
    std::vector<double> curvatures = {0.4, 0.3};  // per non-categorical dim; 0.25 beyond
    std::vector<double> optima = {0.7, 0.2};      // unit-space peak; 0.5 beyond
    std::vector<double> penalties = {0.0, 0.05, 0.10};  // per choice index, cycled
    double tau_base = 5.0;
    double tau_scale = 20.0;
    double sigma_noise = 0.005;
    bool noise_free = false;
    std::uint64_t seed = 0;
};

//! noise-free asymptote of a configuration
double synthetic_asymptote(const BenchmarkSpec& spec, const SearchSpace& space,
                           const Configuration& config);

double synthetic_score(const BenchmarkSpec& spec, const SearchSpace& space,
                       const Configuration& config, long long budget);

//! lambda1, lambda2 in [0,1]; choice in {A,B,C}
SearchSpace reference_benchmark_space();

class SyntheticRunner : public ObjectiveRunner {
  public:
    SyntheticRunner(BenchmarkSpec spec, SearchSpace space);
    EvalOutcome evaluate(const EvaluationRequest& request) override;
    bool resumable() const override { return true; }
    bool concurrent_safe() const override { return true; }

    const BenchmarkSpec& spec() const { return spec_; }

  private:
    BenchmarkSpec spec_;
    SearchSpace space_;
};

//! wire format: one JSON object per line
std::string encode_request(const EvaluationRequest& request, const SearchSpace& space);

//! Parse a worker response line against its request: id must match, budgets
//! must land exactly on the request grid, scores must be finite. An "error"
//! key or malformed JSON becomes a failure outcome.
EvalOutcome decode_response(const std::string& line, const EvaluationRequest& request);

//! shared sanity check for measurement grids (also used by in-process runners)
std::string check_measurement_grid(const MeasurementBatch& batch,
                                   const EvaluationRequest& request);

}  // namespace pocaii
