#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pocaii/forecasting.hpp"
#include "pocaii/kde_tpe.hpp"
#include "pocaii/trial_book.hpp"

namespace pocaii {

struct PocaiiParams {
    long long total_budget = 1000;
    int delta = 5;     // budget units per training increment
    int interval = 1;  // m: budget units between measurements; divides delta
    int n_search = 5;  // configurations sampled per search phase
    double epsilon = 0.05;
    double alpha = 1.05;  // improvement factor a forecast must clear
    double gamma = 0.15;
    int n_tpe_candidates = 24;
    ArimaOrder arima{3, 1, 0};
    bool uniform_mix = false;
    int parallel_workers = 1;  // search-phase training dispatch
    //! selections in evaluation phase k; defaults to k
    std::function<int(int)> eval_count;
    //! training increment for iteration k; defaults to the constant delta
    std::function<int(int)> delta_schedule;

    int delta_of(int k) const { return delta_schedule ? delta_schedule(k) : delta; }
    int eval_count_of(int k) const { return eval_count ? eval_count(k) : k; }
};

//! probability that a search-phase draw goes through the model rather than
//! the uniform prior; rises from 1/2 toward 1-epsilon as budget depletes
double tpe_probability(long long remaining, long long total, double epsilon);

//! E[max(S - s_star, 0)] for S ~ N(forecast.mean, forecast.variance)
double expected_improvement(const Forecast& forecast, double s_star);

//! Normalize EI weights into selection probabilities. Entries with zero EI
//! are non-improving pool members; with uniform_mix and a pool of >= 3, every
//! member gets mass 1/(n log n) and EI shares scale into the remainder.
std::vector<double> selection_probabilities(std::span<const double> ei, bool uniform_mix);

//! state needed to continue an interrupted run (log replay hands this over)
struct PocaiiResumeState {
    int completed_iterations = 0;
    //! each trial paired with the budget it consumed so far
    std::vector<std::pair<TrialRecord, long long>> trials;
    std::vector<std::pair<TrialEventKind, long long>> spends;
    std::vector<std::pair<long long, double>> trajectory;
    //! chronological incumbent at the interruption point (score ties between
    //! trials cannot be reconstructed from the series alone)
    long long incumbent_id = -1;
    double incumbent_score = -std::numeric_limits<double>::infinity();
};

class PocaiiOptimizer {
  public:
    PocaiiOptimizer(const SearchSpace& space, ObjectiveRunner& runner, PocaiiParams params,
                    std::uint64_t seed, RunHooks hooks = {});
    PocaiiOptimizer(const SearchSpace& space, ObjectiveRunner& runner, PocaiiParams params,
                    std::uint64_t seed, const PocaiiResumeState& resume, RunHooks hooks = {});

    //! alternate search/evaluation phases while a full search phase is
    //! affordable, then flush the remainder
    RunReport run();

    //! one search phase with the given sample count; returns configs admitted
    int search_phase(int count);
    //! one evaluation phase; false when an empty improving set made it fall
    //! back to a search phase
    bool evaluation_phase();
    //! distribute what is left in interval-sized increments by EI share
    void final_flush();

    //! ids of active trials whose forecast clears alpha at horizon delta/m
    std::vector<long long> improving_ids();

    const std::vector<TrialRecord>& trials() const { return book_.trials(); }
    const BudgetLedger& ledger() const { return book_.ledger(); }
    int iteration() const { return iteration_; }
    long long incumbent_id() const { return book_.incumbent_id(); }
    double incumbent_score() const { return book_.incumbent_score(); }
    int search_config_count() const { return search_config_count_; }

  private:
    int search_phase_impl(int count, Rng& rng);
    bool trial_improving(long long id);
    double trial_ei(long long id);
    ObservationSet history() const;
    Configuration draw_config(Rng& rng, const ObservationSet& obs, double q, bool& used_tpe);
    void train_batch(const std::vector<long long>& ids, long long extra, TrialEventKind kind);

    PocaiiParams params_;
    std::uint64_t seed_;
    TrialBook book_;
    int iteration_ = 0;
    int search_config_count_ = 0;
    bool stopped_early_ = false;
};

RunReport run_pocaii(const SearchSpace& space, ObjectiveRunner& runner, PocaiiParams params,
                     std::uint64_t seed, RunHooks hooks = {});

}  // namespace pocaii
