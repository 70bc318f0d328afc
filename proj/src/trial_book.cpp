#include "pocaii/trial_book.hpp"

#include <stdexcept>

namespace pocaii {

void BudgetLedger::debit(long long amount) {
    if (amount < 0) throw std::logic_error("BudgetLedger: negative debit");
    if (spent + amount > total) throw std::logic_error("BudgetLedger: debit exceeds budget");
    spent += amount;
}

const char* to_string(TrialEventKind kind) {
    switch (kind) {
        case TrialEventKind::sampled: return "sampled";
        case TrialEventKind::trained: return "trained";
        case TrialEventKind::selected: return "selected";
        case TrialEventKind::flushed: return "flushed";
        case TrialEventKind::failed: return "failed";
    }
    return "?";
}

TrialBook::TrialBook(SearchSpace space, ObjectiveRunner& runner, long long total_budget,
                     int interval, RunHooks hooks)
    : space_(std::move(space)), runner_(&runner), interval_(interval), hooks_(std::move(hooks)) {
    if (total_budget < 0) throw std::invalid_argument("TrialBook: negative budget");
    if (interval_ < 1) throw std::invalid_argument("TrialBook: interval must be >= 1");
    if (auto err = validate(space_)) throw std::invalid_argument("TrialBook: " + *err);
    ledger_.total = total_budget;
}

long long TrialBook::admit(Configuration config) {
    config.id = static_cast<long long>(trials_.size());
    TrialRecord rec;
    rec.config = std::move(config);
    rec.series.interval = interval_;
    trials_.push_back(std::move(rec));
    return trials_.back().config.id;
}

bool TrialBook::train(long long id, long long extra, TrialEventKind kind, int iteration,
                      bool fresh) {
    const EvaluationRequest req = make_request(id, extra, fresh);
    return apply_outcome(id, req, runner_->evaluate(req), kind, iteration, fresh);
}

EvaluationRequest TrialBook::make_request(long long id, long long extra, bool fresh) const {
    const TrialRecord& t = trials_.at(static_cast<std::size_t>(id));
    if (extra <= 0 || extra % interval_ != 0)
        throw std::invalid_argument("TrialBook::make_request: extra budget must be a positive "
                                    "multiple of the measurement interval");

    EvaluationRequest req;
    req.config_id = id;
    req.config = t.config;
    req.interval = interval_;
    req.start = fresh ? 0 : t.trained_budget();
    req.end = req.start + extra;
    req.checkpoint = fresh ? std::string{} : t.checkpoint;
    return req;
}

bool TrialBook::apply_outcome(long long id, const EvaluationRequest& req, EvalOutcome out,
                              TrialEventKind kind, int iteration, bool fresh) {
    TrialRecord& t = trial(id);
    if (out.ok)
        if (auto err = check_measurement_grid(out.batch, req); !err.empty())
            out = EvalOutcome::failure(err);

    const long long debit = fresh ? req.end : req.end - req.start;
    ledger_.debit(debit);

    TrialEvent ev;
    ev.requested = kind;
    ev.config_id = id;
    ev.debit = debit;
    ev.cumulative_spent = ledger_.spent;
    ev.iteration = iteration;
    if (kind == TrialEventKind::sampled) ev.params = t.config;

    if (!out.ok) {
        t.failed = true;
        t.active = false;
        ev.kind = TrialEventKind::failed;
        ev.diagnostic = out.diagnostic;
        ev.latest_score = t.latest_score();
    } else {
        if (fresh) {
            t.series.scores.clear();
            t.model.reset();
            t.model_points = 0;
        }
        for (const auto& m : out.batch.measurements) t.series.scores.push_back(m.score);
        t.checkpoint = out.batch.checkpoint;
        ev.kind = kind;
        ev.measurements = out.batch.measurements;
        ev.checkpoint = t.checkpoint;
        ev.latest_score = t.latest_score();
        if (!t.failed) {
            const double best_in_batch = [&] {
                double b = -std::numeric_limits<double>::infinity();
                for (const auto& m : out.batch.measurements) b = std::max(b, m.score);
                return b;
            }();
            if (best_in_batch > incumbent_score_) {
                incumbent_score_ = best_in_batch;
                incumbent_id_ = id;
            }
        }
    }

    spend_[static_cast<int>(kind)] += debit;  // attribute to the requesting phase
    trajectory_.emplace_back(ledger_.spent, incumbent_score_);
    ev.incumbent_score = incumbent_score_;
    ev.incumbent_id = incumbent_id_;
    if (hooks_.on_event) hooks_.on_event(ev);
    return out.ok;
}

const FittedArima& TrialBook::model(long long id, const ArimaOrder& order) {
    TrialRecord& t = trial(id);
    if (!t.model || t.model_points != t.series.size()) {
        t.model = fit_or_fallback(t.series, order);
        t.model_points = t.series.size();
    }
    return *t.model;
}

long long TrialBook::spend_of(TrialEventKind kind) const {
    return spend_[static_cast<int>(kind)];
}

void TrialBook::fill_report(RunReport& report) const {
    report.total_budget = ledger_.total;
    report.spent = ledger_.spent;
    report.trials = trials_;
    report.incumbent_trajectory = trajectory_;
    report.incumbent_id = incumbent_id_;
    report.incumbent_score = incumbent_score_;
    report.search_spend = spend_of(TrialEventKind::sampled);
    report.eval_spend = spend_of(TrialEventKind::selected);
    report.flush_spend = spend_of(TrialEventKind::flushed);
}

void TrialBook::restore_spend(TrialEventKind kind, long long amount) {
    spend_[static_cast<int>(kind)] += amount;
}

void TrialBook::restore_trial(TrialRecord record, long long already_spent_delta) {
    if (record.config.id != static_cast<long long>(trials_.size()))
        throw std::invalid_argument("TrialBook::restore_trial: ids must arrive in order");
    ledger_.debit(already_spent_delta);
    // a trial that failed later still contributed its earlier measurements
    for (double s : record.series.scores)
        if (s > incumbent_score_) {
            incumbent_score_ = s;
            incumbent_id_ = record.config.id;
        }
    trials_.push_back(std::move(record));
}

void TrialBook::restore_trajectory(std::vector<std::pair<long long, double>> points) {
    trajectory_ = std::move(points);
}

void TrialBook::restore_incumbent(long long id, double score) {
    incumbent_id_ = id;
    incumbent_score_ = score;
}

}  // namespace pocaii
