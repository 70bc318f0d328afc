#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pocaii/rng.hpp"

namespace pocaii {

enum class ParamKind { continuous, integer, categorical };

struct ParameterSpec {
    std::string name;
    ParamKind kind = ParamKind::continuous;
    double low = 0.0;   // inclusive bounds (continuous / integer)
    double high = 1.0;  // inclusive
    bool log_scale = false;
    std::vector<std::string> choices;  // categorical only

    static ParameterSpec make_continuous(std::string name, double low, double high,
                                         bool log_scale = false);
    static ParameterSpec make_integer(std::string name, long long low, long long high,
                                      bool log_scale = false);
    static ParameterSpec make_categorical(std::string name, std::vector<std::string> choices);

    int choice_count() const { return static_cast<int>(choices.size()); }
};

//! Hyperparameter vector. Values are stored as doubles aligned with the space:
//! continuous -> value, integer -> exact integral double, categorical -> choice index.
struct Configuration {
    long long id = -1;  // unassigned until the trial is admitted to a run
    std::vector<double> values;

    bool same_values(const Configuration& other) const { return values == other.values; }
};

struct SearchSpace {
    std::vector<ParameterSpec> params;

    std::size_t dimension() const { return params.size(); }
    bool empty() const { return params.empty(); }
};

//: nullopt when well-formed, else the first violated rule
std::optional<std::string> validate(const SearchSpace& space);

//! independent per-coordinate draw; log-scale coordinates uniform in log-space
Configuration sample_uniform(const SearchSpace& space, Rng& rng);

//! map to [0,1]^d; categorical coordinates pass through as the choice index
std::vector<double> to_unit(const SearchSpace& space, const Configuration& config);

//! inverse of to_unit; integer coordinates round to the nearest feasible value
Configuration from_unit(const SearchSpace& space, std::span<const double> unit);

//: every coordinate within bounds / a valid choice index
bool contains(const SearchSpace& space, const Configuration& config);

}  // namespace pocaii
