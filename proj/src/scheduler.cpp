#include "pocaii/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "pocaii/stats.hpp"

namespace pocaii {

namespace {

constexpr int kSearchStream = 1;
constexpr int kEvalStream = 2;

}  // namespace

double tpe_probability(long long remaining, long long total, double epsilon) {
    if (total <= 0) throw std::invalid_argument("tpe_probability: total budget must be positive");
    if (remaining < 0 || remaining > total)
        throw std::invalid_argument("tpe_probability: remaining budget out of range");
    if (epsilon < 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("tpe_probability: epsilon must lie in [0, 1)");
    const double ratio = static_cast<double>(remaining) / static_cast<double>(total);
    return std::min(1.0 - epsilon, 1.0 - 0.5 * ratio);
}

double expected_improvement(const Forecast& forecast, double best_score) {
    const double sigma = std::sqrt(forecast.variance);
    if (!(sigma > 0.0))
        throw std::invalid_argument("expected_improvement: forecast variance must be positive");
    const double z = (forecast.mean - best_score) / sigma;
    const double ei = sigma * (normal_pdf(z) + z * normal_cdf(z));
    return std::max(ei, 0.0);
}

std::vector<double> selection_probabilities(std::span<const double> ei, bool uniform_mix) {
    if (ei.empty()) throw std::invalid_argument("selection_probabilities: empty candidate set");
    double sum = 0.0;
    for (double v : ei) {
        if (!(v >= 0.0))
            throw std::invalid_argument("selection_probabilities: improvements must be >= 0");
        sum += v;
    }
    if (!(sum > 0.0))
        throw std::invalid_argument("selection_probabilities: no positive expected improvement");

    const std::size_t n = ei.size();
    std::vector<double> probs(n);
    if (!uniform_mix || n < 3) {
        for (std::size_t i = 0; i < n; ++i) probs[i] = ei[i] / sum;
        return probs;
    }
    // uniform floor keeps every candidate selectable while the bulk of the
    // mass still follows the improvement shares
    const double log_n = std::log(static_cast<double>(n));
    const double floor = 1.0 / (static_cast<double>(n) * log_n);
    const double share = 1.0 - 1.0 / log_n;
    for (std::size_t i = 0; i < n; ++i) probs[i] = floor + share * ei[i] / sum;
    return probs;
}

PocaiiOptimizer::PocaiiOptimizer(const SearchSpace& space, ObjectiveRunner& runner,
                                 PocaiiParams params, std::uint64_t seed, RunHooks hooks)
    : params_(std::move(params)),
      seed_(seed),
      book_(space, runner, params_.total_budget, params_.interval, std::move(hooks)) {
    if (params_.interval <= 0) throw std::invalid_argument("pocaii: interval must be positive");
    if (params_.delta <= 0 || params_.delta % params_.interval != 0)
        throw std::invalid_argument("pocaii: delta must be a positive multiple of the interval");
    if (params_.total_budget < params_.delta)
        throw std::invalid_argument("infeasible budget: smaller than one training increment");
    if (params_.n_search <= 0) throw std::invalid_argument("pocaii: n_search must be positive");
    if (params_.epsilon < 0.0 || params_.epsilon >= 1.0)
        throw std::invalid_argument("pocaii: epsilon must lie in [0, 1)");
    if (!(params_.alpha > 1.0)) throw std::invalid_argument("pocaii: alpha must exceed 1");
    if (params_.gamma <= 0.0 || params_.gamma >= 1.0)
        throw std::invalid_argument("pocaii: gamma must lie in (0, 1)");
    if (params_.n_tpe_candidates <= 0)
        throw std::invalid_argument("pocaii: n_tpe_candidates must be positive");
    if (params_.parallel_workers <= 0)
        throw std::invalid_argument("pocaii: parallel_workers must be positive");
}

PocaiiOptimizer::PocaiiOptimizer(const SearchSpace& space, ObjectiveRunner& runner,
                                 PocaiiParams params, std::uint64_t seed,
                                 const PocaiiResumeState& state, RunHooks hooks)
    : PocaiiOptimizer(space, runner, std::move(params), seed, std::move(hooks)) {
    iteration_ = state.completed_iterations;
    for (const auto& [record, consumed] : state.trials) book_.restore_trial(record, consumed);
    for (const auto& [kind, amount] : state.spends) book_.restore_spend(kind, amount);
    book_.restore_trajectory(state.trajectory);
    if (state.incumbent_id >= 0) book_.restore_incumbent(state.incumbent_id, state.incumbent_score);
    // every configuration enters through a search phase (regular or fallback)
    search_config_count_ = static_cast<int>(book_.trials().size());
}

ObservationSet PocaiiOptimizer::history() const {
    ObservationSet obs;
    for (const auto& t : book_.trials()) obs.upsert(t.config, t.latest_score());
    return obs;
}

Configuration PocaiiOptimizer::draw_config(Rng& rng, const ObservationSet& obs, double q,
                                           bool& used_tpe) {
    used_tpe = false;
    const std::size_t dim = book_.space().dimension();
    if (obs.size() > dim + 1) {
        const double v = uniform01(rng);
        if (v <= q) {
            used_tpe = true;
            return propose(obs, book_.space(),
                           TpeParams{params_.gamma, params_.n_tpe_candidates}, rng);
        }
    }
    return sample_uniform(book_.space(), rng);
}

void PocaiiOptimizer::train_batch(const std::vector<long long>& ids, long long extra,
                                  TrialEventKind kind) {
    if (ids.empty()) return;
    if (params_.parallel_workers > 1 && book_.runner().concurrent_safe() && ids.size() > 1) {
        std::vector<EvaluationRequest> reqs;
        reqs.reserve(ids.size());
        for (long long id : ids) reqs.push_back(book_.make_request(id, extra));
        std::vector<std::future<EvalOutcome>> jobs;
        jobs.reserve(ids.size());
        for (const auto& req : reqs)
            jobs.push_back(std::async(std::launch::async,
                                      [&runner = book_.runner(), req] { return runner.evaluate(req); }));
        for (std::size_t i = 0; i < ids.size(); ++i)
            book_.apply_outcome(ids[i], reqs[i], jobs[i].get(), kind, iteration_);
        return;
    }
    for (long long id : ids) book_.train(id, extra, kind, iteration_);
}

int PocaiiOptimizer::search_phase(int count) {
    Rng rng = make_rng(seed_, static_cast<std::uint64_t>(iteration_), kSearchStream);
    return search_phase_impl(count, rng);
}

int PocaiiOptimizer::search_phase_impl(int count, Rng& rng) {
    const long long delta = params_.delta_of(iteration_);
    const long long start_remaining = book_.ledger().remaining();
    // keep strictly more than one increment in reserve: the j-th sample is
    // only admitted while the budget left after it still exceeds delta
    long long plan = 0;
    if (start_remaining > delta) plan = (start_remaining - 1) / delta;
    plan = std::min<long long>(plan, count);
    if (plan <= 0) return 0;

    const double q =
        tpe_probability(start_remaining, params_.total_budget, params_.epsilon);
    const ObservationSet obs = history();

    // all configurations are drawn before any training is dispatched, so
    // parallel evaluation cannot change what gets sampled
    std::vector<long long> ids;
    ids.reserve(static_cast<std::size_t>(plan));
    for (long long i = 0; i < plan; ++i) {
        bool used_tpe = false;
        Configuration c = draw_config(rng, obs, q, used_tpe);
        ids.push_back(book_.admit(std::move(c)));
    }
    search_config_count_ += static_cast<int>(ids.size());
    train_batch(ids, delta, TrialEventKind::sampled);
    return static_cast<int>(ids.size());
}

std::vector<long long> PocaiiOptimizer::improving_ids() {
    std::vector<long long> out;
    for (const auto& t : book_.trials())
        if (trial_improving(t.config.id)) out.push_back(t.config.id);
    return out;
}

bool PocaiiOptimizer::trial_improving(long long id) {
    const TrialRecord& t = book_.trials().at(static_cast<std::size_t>(id));
    if (!t.active || t.failed || t.series.empty()) return false;
    const long long delta = params_.delta_of(iteration_ == 0 ? 1 : iteration_);
    const int horizon = static_cast<int>(delta / params_.interval);
    const Forecast f = forecast(book_.model(id, params_.arima), horizon);
    const double s = t.latest_score();
    // must clear a relative threshold on top of being a strict improvement
    return f.mean > s && f.mean - s >= (params_.alpha - 1.0) * std::abs(s);
}

double PocaiiOptimizer::trial_ei(long long id) {
    const long long delta = params_.delta_of(iteration_ == 0 ? 1 : iteration_);
    const int horizon = static_cast<int>(delta / params_.interval);
    const Forecast f = forecast(book_.model(id, params_.arima), horizon);
    return expected_improvement(f, book_.incumbent_score());
}

bool PocaiiOptimizer::evaluation_phase() {
    Rng rng = make_rng(seed_, static_cast<std::uint64_t>(iteration_), kEvalStream);
    const long long delta = params_.delta_of(iteration_);

    std::vector<long long> improving = improving_ids();
    double total_ei = 0.0;
    for (long long id : improving) total_ei += trial_ei(id);
    if (improving.empty() || !(total_ei > 0.0)) {
        // nothing is forecast to improve; reinvest this phase in exploration,
        // widening the batch with the iteration index
        search_phase_impl(iteration_, rng);
        return false;
    }

    const int budgeted = params_.eval_count_of(iteration_);
    for (int sel = 0; sel < budgeted; ++sel) {
        if (book_.ledger().remaining() < delta) break;
        if (improving.empty()) break;

        std::vector<long long> pool;
        if (params_.uniform_mix) {
            for (const auto& t : book_.trials())
                if (t.active && !t.failed && !t.series.empty()) pool.push_back(t.config.id);
        } else {
            pool = improving;
        }
        if (pool.empty()) break;

        std::vector<double> ei(pool.size(), 0.0);
        double sum = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (std::find(improving.begin(), improving.end(), pool[i]) != improving.end())
                ei[i] = trial_ei(pool[i]);
            sum += ei[i];
        }
        if (!(sum > 0.0)) break;

        const std::vector<double> probs = selection_probabilities(ei, params_.uniform_mix);
        if (book_.hooks().on_selection_probabilities)
            book_.hooks().on_selection_probabilities(probs);

        const double r = uniform01(rng);
        std::size_t pick = probs.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (r < acc) {
                pick = i;
                break;
            }
        }

        const long long chosen = pool[pick];
        book_.train(chosen, delta, TrialEventKind::selected, iteration_);
        if (!trial_improving(chosen))
            improving.erase(std::remove(improving.begin(), improving.end(), chosen),
                            improving.end());
    }
    return true;
}

void PocaiiOptimizer::final_flush() {
    const long long remaining = book_.ledger().remaining();
    const long long n_inc = remaining / params_.interval;
    if (n_inc <= 0) return;

    std::vector<long long> improving = improving_ids();
    std::vector<double> ei;
    ei.reserve(improving.size());
    double sum = 0.0;
    for (long long id : improving) {
        ei.push_back(trial_ei(id));
        sum += ei.back();
    }

    std::vector<std::pair<long long, long long>> allocation;  // (id, increments)
    if (improving.empty() || !(sum > 0.0)) {
        const long long inc_id = book_.incumbent_id();
        if (inc_id < 0) return;
        const TrialRecord& t = book_.trials().at(static_cast<std::size_t>(inc_id));
        if (t.failed) return;
        allocation.emplace_back(inc_id, n_inc);
    } else {
        // largest-remainder split of the increments, proportional to EI
        std::vector<long long> base(improving.size());
        std::vector<double> frac(improving.size());
        long long assigned = 0;
        for (std::size_t i = 0; i < improving.size(); ++i) {
            const double quota = static_cast<double>(n_inc) * ei[i] / sum;
            base[i] = static_cast<long long>(std::floor(quota));
            frac[i] = quota - static_cast<double>(base[i]);
            assigned += base[i];
        }
        std::vector<std::size_t> order(improving.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (frac[a] != frac[b]) return frac[a] > frac[b];
            return improving[a] < improving[b];
        });
        for (long long left = n_inc - assigned; left > 0; --left)
            base[order[static_cast<std::size_t>(n_inc - assigned - left)]] += 1;
        for (std::size_t i = 0; i < improving.size(); ++i)
            if (base[i] > 0) allocation.emplace_back(improving[i], base[i]);
    }

    std::sort(allocation.begin(), allocation.end());
    for (const auto& [id, increments] : allocation)
        book_.train(id, increments * params_.interval, TrialEventKind::flushed, iteration_);
}

RunReport PocaiiOptimizer::run() {
    while (true) {
        const long long next_delta = params_.delta_of(iteration_ + 1);
        const long long reserve = static_cast<long long>(params_.n_search) * next_delta;
        if (book_.ledger().remaining() <= reserve) break;

        ++iteration_;
        search_phase(params_.n_search);
        if (book_.hooks().on_phase_end)
            book_.hooks().on_phase_end(iteration_, "search", book_.ledger().spent);
        evaluation_phase();
        if (book_.hooks().on_phase_end)
            book_.hooks().on_phase_end(iteration_, "evaluation", book_.ledger().spent);
        if (book_.hooks().stop_after_iteration &&
            book_.hooks().stop_after_iteration(book_.ledger().spent)) {
            stopped_early_ = true;
            break;
        }
    }
    if (!stopped_early_) final_flush();

    RunReport report;
    report.algorithm = "pocaii";
    report.seed = seed_;
    report.iterations = iteration_;
    report.search_config_count = search_config_count_;
    report.completed = !stopped_early_;
    book_.fill_report(report);
    return report;
}

RunReport run_pocaii(const SearchSpace& space, ObjectiveRunner& runner, PocaiiParams params,
                     std::uint64_t seed, RunHooks hooks) {
    PocaiiOptimizer opt(space, runner, std::move(params), seed, std::move(hooks));
    return opt.run();
}

}  // namespace pocaii
