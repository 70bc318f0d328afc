#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pocaii/rng.hpp"
#include "pocaii/search_space.hpp"

namespace pocaii {

struct Observation {
    Configuration config;
    double score = 0.0;  // latest score of that configuration (maximize)
};

//! One entry per configuration id; re-observing a config replaces its score.
struct ObservationSet {
    std::vector<Observation> entries;

    void upsert(const Configuration& config, double score);
    std::size_t size() const { return entries.size(); }
};

struct SplitResult {
    ObservationSet good;
    ObservationSet bad;
    double threshold = 0.0;  // lowest score admitted to good
};

//! Top ceil(gamma*n) by score into good (ties to the lower config id),
//! clamped so both sides stay non-empty for n >= 2.
SplitResult split_good_bad(const ObservationSet& history, double gamma);

//! sigma_hat * n^(-1/(d+4)) floored at 1e-3; d = full space dimension.
double scott_bandwidth(std::span<const double> points, std::size_t space_dimension);

double kernel_gaussian(double x, double center, double bandwidth);

//! Aitchison-Aitken: 1-v on a category match, v/(n_choices-1) otherwise.
double kernel_aitchison_aitken(int x, int center, double bandwidth, int n_choices);

//! Per-dimension product KDE over unit-space points, mixed with a uniform
//! prior at weight 1/(n+1); each kernel carries weight 1/(n+1).
class KdeModel {
  public:
    static KdeModel fit(const ObservationSet& observations, const SearchSpace& space);

    double density(std::span<const double> unit_point) const;

    double prior_weight() const { return 1.0 / (static_cast<double>(points_.size()) + 1.0); }
    std::size_t observation_count() const { return points_.size(); }
    const std::vector<double>& bandwidths() const { return bandwidths_; }

  private:
    std::vector<ParamKind> kinds_;
    std::vector<int> choice_counts_;         // categorical dims; 0 elsewhere
    std::vector<std::vector<double>> points_;  // unit-space observations
    std::vector<double> bandwidths_;
    double prior_density_ = 1.0;  // product of 1/n_choices over categorical dims
};

//! good density over bad density; denominator floored at 1e-12
double acquisition_ratio(const KdeModel& good, const KdeModel& bad,
                         std::span<const double> unit_point);

struct TpeParams {
    double gamma = 0.15;    // good-fraction of history
    int n_candidates = 24;  // uniform candidates scored per proposal
};

struct TpeProposal {
    Configuration chosen;
    std::size_t chosen_index = 0;
    std::vector<Configuration> candidates;
    std::vector<double> ratios;
};

//! Draw n_candidates uniformly (exact value-duplicates of history redrawn, at
//! most 10 retries each), score by acquisition ratio, return the argmax
//! (ties to the lowest candidate index). Requires |history| >= 2.
TpeProposal propose_detailed(const ObservationSet& history, const SearchSpace& space,
                             const TpeParams& params, Rng& rng);

Configuration propose(const ObservationSet& history, const SearchSpace& space,
                      const TpeParams& params, Rng& rng);

}  // namespace pocaii
