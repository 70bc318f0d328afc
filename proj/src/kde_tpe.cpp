#include "pocaii/kde_tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pocaii/stats.hpp"

namespace pocaii {

namespace {
constexpr double kBandwidthFloor = 1e-3;
constexpr double kDensityFloor = 1e-12;
constexpr double kAaLowerClamp = 0.01;
}  // namespace

void ObservationSet::upsert(const Configuration& config, double score) {
    for (auto& e : entries) {
        if (e.config.id == config.id) {
            e.config = config;
            e.score = score;
            return;
        }
    }
    entries.push_back({config, score});
}

SplitResult split_good_bad(const ObservationSet& history, double gamma) {
    const std::size_t n = history.size();
    if (n < 2) throw std::invalid_argument("split_good_bad: need at least 2 observations");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("split_good_bad: gamma must lie in (0,1)");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = history.entries[a];
        const auto& eb = history.entries[b];
        if (ea.score != eb.score) return ea.score > eb.score;
        return ea.config.id < eb.config.id;
    });

    std::size_t n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
    n_good = std::max<std::size_t>(1, std::min(n_good, n - 1));

    SplitResult r;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = history.entries[order[i]];
        (i < n_good ? r.good : r.bad).entries.push_back(e);
    }
    r.threshold = r.good.entries.back().score;
    return r;
}

double scott_bandwidth(std::span<const double> points, std::size_t space_dimension) {
    if (points.size() < 2) throw std::invalid_argument("scott_bandwidth: need at least 2 points");
    if (space_dimension == 0) throw std::invalid_argument("scott_bandwidth: zero-dimensional space");
    const double n = static_cast<double>(points.size());
    const double d = static_cast<double>(space_dimension);
    const double bw = sample_stddev(points) * std::pow(n, -1.0 / (d + 4.0));
    return std::max(bw, kBandwidthFloor);
}

double kernel_gaussian(double x, double center, double bandwidth) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel_gaussian: bandwidth must be > 0");
    const double z = (x - center) / bandwidth;
    return normal_pdf(z) / bandwidth;
}

double kernel_aitchison_aitken(int x, int center, double bandwidth, int n_choices) {
    if (n_choices < 2) throw std::invalid_argument("kernel_aitchison_aitken: need >= 2 choices");
    if (!(bandwidth > 0.0 && bandwidth < 1.0))
        throw std::invalid_argument("kernel_aitchison_aitken: bandwidth outside (0,1)");
    return x == center ? 1.0 - bandwidth : bandwidth / (n_choices - 1.0);
}

KdeModel KdeModel::fit(const ObservationSet& observations, const SearchSpace& space) {
    if (auto err = validate(space)) throw std::invalid_argument("KdeModel::fit: " + *err);

    KdeModel m;
    const std::size_t d = space.dimension();
    m.kinds_.reserve(d);
    m.choice_counts_.reserve(d);
    for (const auto& p : space.params) {
        m.kinds_.push_back(p.kind);
        m.choice_counts_.push_back(p.kind == ParamKind::categorical ? p.choice_count() : 0);
        if (p.kind == ParamKind::categorical) m.prior_density_ /= p.choice_count();
    }

    for (const auto& e : observations.entries) m.points_.push_back(to_unit(space, e.config));

    const double n = static_cast<double>(m.points_.size());
    m.bandwidths_.assign(d, kBandwidthFloor);
    if (m.points_.empty()) return m;  // prior-only model

    const double scale = std::pow(n, -1.0 / (static_cast<double>(d) + 4.0));
    for (std::size_t j = 0; j < d; ++j) {
        if (m.kinds_[j] == ParamKind::categorical) {
            const int nc = m.choice_counts_[j];
            const double upper = (nc - 1.0) / nc;
            m.bandwidths_[j] = std::min(std::max(upper * scale, kAaLowerClamp), upper);
            continue;
        }
        std::vector<double> col(m.points_.size());
        for (std::size_t i = 0; i < m.points_.size(); ++i) col[i] = m.points_[i][j];
        // a single observation has no spread; treat like coincident points
        m.bandwidths_[j] =
            col.size() < 2 ? kBandwidthFloor
                           : std::max(sample_stddev(col) * scale, kBandwidthFloor);
    }
    return m;
}

double KdeModel::density(std::span<const double> unit_point) const {
    if (unit_point.size() != kinds_.size())
        throw std::invalid_argument("KdeModel::density: point arity mismatch");
    const double w = prior_weight();
    double total = w * prior_density_;
    for (const auto& obs : points_) {
        double k = 1.0;
        for (std::size_t j = 0; j < kinds_.size(); ++j) {
            if (kinds_[j] == ParamKind::categorical) {
                k *= kernel_aitchison_aitken(static_cast<int>(unit_point[j]),
                                             static_cast<int>(obs[j]), bandwidths_[j],
                                             choice_counts_[j]);
            } else {
                k *= kernel_gaussian(unit_point[j], obs[j], bandwidths_[j]);
            }
        }
        total += w * k;
    }
    return total;
}

double acquisition_ratio(const KdeModel& good, const KdeModel& bad,
                         std::span<const double> unit_point) {
    return good.density(unit_point) / std::max(bad.density(unit_point), kDensityFloor);
}

TpeProposal propose_detailed(const ObservationSet& history, const SearchSpace& space,
                             const TpeParams& params, Rng& rng) {
    if (history.size() < 2) throw std::invalid_argument("propose: need at least 2 observations");
    if (params.n_candidates < 1) throw std::invalid_argument("propose: n_candidates must be >= 1");

    const SplitResult split = split_good_bad(history, params.gamma);
    const KdeModel good = KdeModel::fit(split.good, space);
    const KdeModel bad = KdeModel::fit(split.bad, space);

    auto duplicates_history = [&](const Configuration& c) {
        for (const auto& e : history.entries)
            if (e.config.same_values(c)) return true;
        return false;
    };

    TpeProposal out;
    out.candidates.reserve(params.n_candidates);
    out.ratios.reserve(params.n_candidates);
    for (int i = 0; i < params.n_candidates; ++i) {
        Configuration c = sample_uniform(space, rng);
        for (int retry = 0; retry < 10 && duplicates_history(c); ++retry)
            c = sample_uniform(space, rng);
        const auto u = to_unit(space, c);
        out.ratios.push_back(acquisition_ratio(good, bad, u));
        out.candidates.push_back(std::move(c));
    }

    out.chosen_index = 0;
    for (std::size_t i = 1; i < out.ratios.size(); ++i)
        if (out.ratios[i] > out.ratios[out.chosen_index]) out.chosen_index = i;
    out.chosen = out.candidates[out.chosen_index];
    return out;
}

Configuration propose(const ObservationSet& history, const SearchSpace& space,
                      const TpeParams& params, Rng& rng) {
    return propose_detailed(history, space, params, rng).chosen;
}

}  // namespace pocaii
