#include "pocaii/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "pocaii/rng.hpp"

namespace pocaii {

namespace {

constexpr int kBaselineStream = 4;

long long checked_pow(long long base, int exp) {
    long long v = 1;
    for (int i = 0; i < exp; ++i) {
        if (v > (1LL << 50) / base) throw std::overflow_error("bracket budget overflow");
        v *= base;
    }
    return v;
}

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

}  // namespace

ShBracket ShBracket::plan(long long n, long long delta_start, int eta, long long top_budget) {
    if (n < 1) throw std::invalid_argument("bracket needs at least one configuration");
    if (delta_start < 1 || top_budget < delta_start)
        throw std::invalid_argument("bracket budgets must satisfy 1 <= delta_start <= top");
    if (eta < 2) throw std::invalid_argument("elimination rate must be at least 2");

    ShBracket b;
    b.n = n;
    b.delta_start = delta_start;
    b.eta = eta;
    long long budget = delta_start;
    long long denom = 1;
    while (true) {
        b.rungs.push_back({std::max<long long>(1, n / denom), budget});
        if (budget >= top_budget) break;
        budget *= eta;
        denom *= eta;
        if (budget > top_budget)
            throw std::invalid_argument("top budget must be delta_start times a power of eta");
    }
    return b;
}

long long ShBracket::planned_cost(bool resume) const {
    long long cost = 0;
    long long prev_budget = 0;
    for (const ShRung& r : rungs) {
        cost += r.count * (resume ? r.budget - prev_budget : r.budget);
        prev_budget = r.budget;
    }
    return cost;
}

long long HyperbandSchedule::cost() const {
    long long total = 0;
    for (const ShBracket& b : brackets) total += b.planned_cost(false);
    return total;
}

HyperbandSchedule hyperband_schedule(long long total_budget, long long delta_min,
                                     long long beta_max, int eta) {
    if (delta_min < 1 || beta_max < delta_min)
        throw std::invalid_argument("hyperband needs 1 <= delta_min <= beta_max");
    if (eta < 2) throw std::invalid_argument("elimination rate must be at least 2");

    HyperbandSchedule s;
    s.delta_min = delta_min;
    s.beta_max = beta_max;
    s.eta = eta;

    // bracket count: one per fidelity level delta_min * eta^j <= beta_max
    int n_levels = 1;
    while (delta_min * checked_pow(eta, n_levels) <= beta_max) ++n_levels;
    s.bracket_count = n_levels;
    if (beta_max != delta_min * checked_pow(eta, n_levels - 1))
        throw std::invalid_argument("beta_max must be delta_min times a power of eta");

    // cost of pushing a single config through every fidelity level
    long long ladder = 0;
    for (int k = 0; k < n_levels; ++k) ladder += delta_min * checked_pow(eta, k);

    for (int i = 1; i <= n_levels; ++i) {
        const long long start = beta_max / checked_pow(eta, i - 1);
        // per-slot cost of bracket i: start * sum_{k<i} eta^-k, kept exact as
        // start * (eta^i - 1) / (eta^(i-1) * (eta - 1))
        const long long num = ladder * checked_pow(eta, i - 1) * (eta - 1);
        const long long den = start * (checked_pow(eta, i) - 1);
        const long long n_i = std::max<long long>(1, ceil_div(num, den));
        s.brackets.push_back(ShBracket::plan(n_i, start, eta, beta_max));
    }

    long long cheapest = s.brackets.front().planned_cost(false);
    for (const ShBracket& b : s.brackets)
        cheapest = std::min(cheapest, b.planned_cost(false));
    if (total_budget < cheapest)
        throw std::invalid_argument("budget cannot cover even the cheapest bracket");
    return s;
}

std::vector<long long> successive_halving(TrialBook& book, std::vector<long long> ids,
                                          long long delta_start, int eta, long long top_budget,
                                          const ShOptions& options, int iteration) {
    if (ids.empty()) return {};
    if (eta < 2) throw std::invalid_argument("elimination rate must be at least 2");

    auto ranked = [&](std::vector<long long> v) {
        std::stable_sort(v.begin(), v.end(), [&](long long a, long long b) {
            const double sa = book.trials().at(static_cast<std::size_t>(a)).latest_score();
            const double sb = book.trials().at(static_cast<std::size_t>(b)).latest_score();
            if (sa != sb) return sa > sb;
            return a < b;
        });
        return v;
    };

    long long budget = delta_start;
    bool first_rung = true;
    while (true) {
        // never start a rung the ledger cannot finish: a partially scored
        // rung would rank configs at mixed budgets
        long long rung_cost = 0;
        for (long long id : ids) {
            const auto& t = book.trials().at(static_cast<std::size_t>(id));
            rung_cost += options.resume ? budget - t.trained_budget() : budget;
        }
        if (rung_cost > book.remaining()) break;

        for (long long id : ids) {
            const auto& t = book.trials().at(static_cast<std::size_t>(id));
            const TrialEventKind kind =
                first_rung ? TrialEventKind::sampled : TrialEventKind::trained;
            if (options.resume)
                book.train(id, budget - t.trained_budget(), kind, iteration);
            else
                book.train(id, budget, kind, iteration, /*fresh=*/true);
        }
        first_rung = false;

        if (budget >= top_budget) break;
        const long long keep =
            options.floor_promotion
                ? std::max<long long>(1, static_cast<long long>(ids.size()) / eta)
                : ceil_div(static_cast<long long>(ids.size()), eta);
        std::vector<long long> order = ranked(ids);
        order.resize(static_cast<std::size_t>(keep));
        std::sort(order.begin(), order.end());
        ids = std::move(order);
        budget *= eta;
    }
    return ranked(ids);
}

RunReport run_hyperband(const SearchSpace& space, ObjectiveRunner& runner,
                        const HyperbandParams& params, std::uint64_t seed, RunHooks hooks) {
    const HyperbandSchedule schedule =
        hyperband_schedule(params.total_budget, params.delta_min, params.beta_max, params.eta);
    TrialBook book(space, runner, params.total_budget, static_cast<int>(params.delta_min),
                   std::move(hooks));
    Rng rng = make_rng(seed, 0, kBaselineStream);

    const long long repetition_cost = schedule.cost();
    int repetition = 0;
    while (book.remaining() >= repetition_cost) {
        ++repetition;
        for (const ShBracket& bracket : schedule.brackets) {
            std::vector<long long> ids;
            ids.reserve(static_cast<std::size_t>(bracket.n));
            for (long long i = 0; i < bracket.n; ++i)
                ids.push_back(book.admit(sample_uniform(space, rng)));
            successive_halving(book, std::move(ids), bracket.delta_start, bracket.eta,
                               params.beta_max,
                               ShOptions{.resume = false, .floor_promotion = true}, repetition);
        }
    }

    RunReport report;
    report.algorithm = "hyperband";
    report.seed = seed;
    report.iterations = repetition;
    report.search_config_count = static_cast<int>(book.trials().size());
    report.completed = true;
    book.fill_report(report);
    return report;
}

RunReport run_successive_halving(const SearchSpace& space, ObjectiveRunner& runner,
                                 const SuccessiveHalvingParams& params, std::uint64_t seed,
                                 RunHooks hooks) {
    if (params.n < 1) throw std::invalid_argument("successive halving needs n >= 1");
    TrialBook book(space, runner, params.total_budget, static_cast<int>(params.delta_start),
                   std::move(hooks));
    Rng rng = make_rng(seed, 0, kBaselineStream);

    std::vector<long long> ids;
    ids.reserve(static_cast<std::size_t>(params.n));
    for (long long i = 0; i < params.n; ++i)
        ids.push_back(book.admit(sample_uniform(space, rng)));
    successive_halving(book, std::move(ids), params.delta_start, params.eta, params.beta_max,
                       ShOptions{}, 1);

    RunReport report;
    report.algorithm = "successive-halving";
    report.seed = seed;
    report.iterations = 1;
    report.search_config_count = static_cast<int>(book.trials().size());
    report.completed = true;
    book.fill_report(report);
    return report;
}

RunReport run_random_search(const SearchSpace& space, ObjectiveRunner& runner,
                            const RandomSearchParams& params, std::uint64_t seed,
                            RunHooks hooks) {
    if (params.delta_eval < 1 || params.total_budget < params.delta_eval)
        throw std::invalid_argument("random search needs delta_eval >= 1 and budget >= delta_eval");
    TrialBook book(space, runner, params.total_budget, static_cast<int>(params.delta_eval),
                   std::move(hooks));
    Rng rng = make_rng(seed, 0, kBaselineStream);

    int sampled = 0;
    while (book.remaining() >= params.delta_eval) {
        const long long id = book.admit(sample_uniform(space, rng));
        ++sampled;
        book.train(id, params.delta_eval, TrialEventKind::sampled, sampled);
    }

    RunReport report;
    report.algorithm = "random";
    report.seed = seed;
    report.iterations = sampled;
    report.search_config_count = sampled;
    report.completed = true;
    book.fill_report(report);
    return report;
}

}  // namespace pocaii
