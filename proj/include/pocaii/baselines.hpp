#pragma once

#include <cstdint>
#include <vector>

#include "pocaii/trial_book.hpp"

namespace pocaii {

//! One elimination ladder: rung r trains the surviving configs to
//! delta_start * eta^r.
struct ShRung {
    long long count = 0;   // configs planned at this rung
    long long budget = 0;  // per-config training budget at this rung
};

struct ShBracket {
    long long n = 0;            // initial configuration count
    long long delta_start = 0;  // lowest rung budget
    int eta = 2;                // elimination rate
    std::vector<ShRung> rungs;

    //! rung table with floor(n / eta^r) survivors (clamped to >= 1), budgets
    //! geometric from delta_start up to top_budget
    static ShBracket plan(long long n, long long delta_start, int eta, long long top_budget);

    //! total training cost of the table; resume accounting charges only the
    //! increment a promoted config still needs
    long long planned_cost(bool resume) const;
};

struct HyperbandSchedule {
    long long delta_min = 0;
    long long beta_max = 0;
    int eta = 2;
    int bracket_count = 0;  // number of elimination ladders per repetition
    std::vector<ShBracket> brackets;

    //! cost of running every bracket once, without resume accounting
    long long cost() const;
};

//! Bracket plan for one hyperband repetition. Bracket i (1-based) starts at
//! beta_max * eta^-(i-1) and has i rungs; its config count spreads the cost
//! of one full ladder over the bracket's per-slot cost. Requires beta_max to
//! be delta_min times a power of eta so all rung budgets stay integral.
//! Throws when total_budget cannot cover even the cheapest bracket.
HyperbandSchedule hyperband_schedule(long long total_budget, long long delta_min,
                                     long long beta_max, int eta);

struct ShOptions {
    bool resume = true;           // promoted configs continue from checkpoint
    bool floor_promotion = false;  // keep floor(count/eta) instead of ceil
};

//! Race the given trials through rungs delta_start * eta^r up to top_budget,
//! keeping the top ceil(count/eta) by score each rung (ties to lower id).
//! A rung that no longer fits the ledger is skipped entirely, so rankings
//! never mix budgets. Returns the surviving ids, best score first.
std::vector<long long> successive_halving(TrialBook& book, std::vector<long long> ids,
                                          long long delta_start, int eta, long long top_budget,
                                          const ShOptions& options = {}, int iteration = 0);

struct HyperbandParams {
    long long total_budget = 0;
    long long delta_min = 0;
    long long beta_max = 0;
    int eta = 2;
};

//! Repeat whole hyperbands (every bracket, fresh training, floor promotions)
//! while one still fits the remaining budget.
RunReport run_hyperband(const SearchSpace& space, ObjectiveRunner& runner,
                        const HyperbandParams& params, std::uint64_t seed, RunHooks hooks = {});

struct SuccessiveHalvingParams {
    long long total_budget = 0;
    long long n = 0;  // initial configuration count
    long long delta_start = 0;
    long long beta_max = 0;
    int eta = 2;
};

//! One elimination race over n uniformly drawn configs (resume accounting,
//! ceil promotions); leftover budget stays unspent.
RunReport run_successive_halving(const SearchSpace& space, ObjectiveRunner& runner,
                                 const SuccessiveHalvingParams& params, std::uint64_t seed,
                                 RunHooks hooks = {});

struct RandomSearchParams {
    long long total_budget = 0;
    long long delta_eval = 0;  // budget each sampled config is trained to
};

//! Uniform sampling at a fixed fidelity until the next config no longer fits.
RunReport run_random_search(const SearchSpace& space, ObjectiveRunner& runner,
                            const RandomSearchParams& params, std::uint64_t seed,
                            RunHooks hooks = {});

}  // namespace pocaii
