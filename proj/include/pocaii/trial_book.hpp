#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pocaii/forecasting.hpp"
#include "pocaii/objective.hpp"
#include "pocaii/search_space.hpp"

namespace pocaii {

struct BudgetLedger {
    long long total = 0;
    long long spent = 0;

    long long remaining() const { return total - spent; }
    void debit(long long amount);
};

struct TrialRecord {
    Configuration config;
    LossSeries series;
    std::string checkpoint;
    bool active = true;  // false once the objective fails for this trial
    bool failed = false;

    // cached forecast model, refit whenever the series grows
    std::optional<FittedArima> model;
    std::size_t model_points = 0;

    long long trained_budget() const { return series.last_budget(); }
    double latest_score() const {
        return failed || series.empty() ? -std::numeric_limits<double>::infinity()
                                        : series.latest();
    }
};

enum class TrialEventKind { sampled, trained, selected, flushed, failed };

const char* to_string(TrialEventKind kind);

//! One record per budget debit.
struct TrialEvent {
    TrialEventKind kind = TrialEventKind::sampled;
    //! phase that issued the training call; differs from kind on failures
    TrialEventKind requested = TrialEventKind::sampled;
    long long config_id = -1;
    long long debit = 0;
    long long cumulative_spent = 0;
    double latest_score = 0.0;
    double incumbent_score = 0.0;
    long long incumbent_id = -1;
    int iteration = 0;
    std::vector<Measurement> measurements;  // points added by this debit
    std::string checkpoint;
    std::optional<Configuration> params;  // set on sampled events
    std::string diagnostic;               // set on failed events
};

struct RunHooks {
    std::function<void(const TrialEvent&)> on_event;
    std::function<void(std::span<const double>)> on_selection_probabilities;
    std::function<void(int iteration, const std::string& phase, long long spent)> on_phase_end;
    //! checked after each full iteration; true pauses the run before the flush
    std::function<bool(long long spent)> stop_after_iteration;
};

struct RunReport {
    std::string algorithm;
    std::uint64_t seed = 0;
    long long total_budget = 0;
    long long spent = 0;
    int iterations = 0;
    int search_config_count = 0;
    long long search_spend = 0;
    long long eval_spend = 0;
    long long flush_spend = 0;
    bool completed = true;  // false when paused by stop_after_iteration
    std::vector<TrialRecord> trials;
    //! incumbent score after every budget debit, as (cumulative spent, score)
    std::vector<std::pair<long long, double>> incumbent_trajectory;
    long long incumbent_id = -1;
    double incumbent_score = -std::numeric_limits<double>::infinity();
};

//! Trial table + ledger + event plumbing shared by every scheduler.
class TrialBook {
  public:
    TrialBook(SearchSpace space, ObjectiveRunner& runner, long long total_budget, int interval,
              RunHooks hooks);

    long long admit(Configuration config);  // stamps the next id

    //! Train `extra` more budget units (a failure still debits `extra`).
    //! `fresh` re-runs from budget zero and debits the full end budget.
    bool train(long long id, long long extra, TrialEventKind kind, int iteration,
               bool fresh = false);

    //! split form of train() so training calls can run concurrently while
    //! ledger debits and events stay ordered
    EvaluationRequest make_request(long long id, long long extra, bool fresh = false) const;
    bool apply_outcome(long long id, const EvaluationRequest& request, EvalOutcome outcome,
                       TrialEventKind kind, int iteration, bool fresh = false);

    const std::vector<TrialRecord>& trials() const { return trials_; }
    TrialRecord& trial(long long id) { return trials_.at(static_cast<std::size_t>(id)); }
    const BudgetLedger& ledger() const { return ledger_; }
    long long remaining() const { return ledger_.remaining(); }

    long long incumbent_id() const { return incumbent_id_; }
    double incumbent_score() const { return incumbent_score_; }

    //! refit the cached model if the series grew since the last fit
    const FittedArima& model(long long id, const ArimaOrder& order);

    long long spend_of(TrialEventKind kind) const;
    void fill_report(RunReport& report) const;

    const RunHooks& hooks() const { return hooks_; }
    const SearchSpace& space() const { return space_; }
    ObjectiveRunner& runner() { return *runner_; }
    int interval() const { return interval_; }

    //! restore a previously recorded trial (log replay); keeps ids contiguous
    void restore_trial(TrialRecord record, long long already_spent_delta);
    void restore_spend(TrialEventKind kind, long long amount);
    void restore_trajectory(std::vector<std::pair<long long, double>> points);
    void restore_incumbent(long long id, double score);

  private:
    SearchSpace space_;
    ObjectiveRunner* runner_;
    BudgetLedger ledger_;
    int interval_;
    RunHooks hooks_;
    std::vector<TrialRecord> trials_;
    long long incumbent_id_ = -1;
    double incumbent_score_ = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<long long, double>> trajectory_;
    long long spend_[5] = {0, 0, 0, 0, 0};
};

}  // namespace pocaii
