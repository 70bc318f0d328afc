#include "pocaii/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pocaii {

ParameterSpec ParameterSpec::make_continuous(std::string name, double low, double high,
                                             bool log_scale) {
    ParameterSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::continuous;
    p.low = low;
    p.high = high;
    p.log_scale = log_scale;
    return p;
}

ParameterSpec ParameterSpec::make_integer(std::string name, long long low, long long high,
                                          bool log_scale) {
    ParameterSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::integer;
    p.low = static_cast<double>(low);
    p.high = static_cast<double>(high);
    p.log_scale = log_scale;
    return p;
}

ParameterSpec ParameterSpec::make_categorical(std::string name, std::vector<std::string> choices) {
    ParameterSpec p;
    p.name = std::move(name);
    p.kind = ParamKind::categorical;
    p.choices = std::move(choices);
    return p;
}

std::optional<std::string> validate(const SearchSpace& space) {
    if (space.params.empty()) return "space must declare at least one parameter";
    for (std::size_t i = 0; i < space.params.size(); ++i) {
        const auto& p = space.params[i];
        if (p.name.empty()) return "parameter " + std::to_string(i) + ": empty name";
        for (std::size_t j = 0; j < i; ++j)
            if (space.params[j].name == p.name) return "duplicate parameter name '" + p.name + "'";
        if (p.kind == ParamKind::categorical) {
            if (p.choices.size() < 2)
                return "parameter '" + p.name + "': categorical needs >= 2 choices";
            for (std::size_t a = 0; a < p.choices.size(); ++a)
                for (std::size_t b = 0; b < a; ++b)
                    if (p.choices[a] == p.choices[b])
                        return "parameter '" + p.name + "': duplicate choice '" + p.choices[a] + "'";
            continue;
        }
        if (!(p.low < p.high)) return "parameter '" + p.name + "': low must be < high";
        if (p.log_scale && !(p.low > 0.0))
            return "parameter '" + p.name + "': log scale requires positive bounds";
        if (p.kind == ParamKind::integer) {
            if (p.low != std::floor(p.low) || p.high != std::floor(p.high))
                return "parameter '" + p.name + "': integer bounds must be integral";
        }
    }
    return std::nullopt;
}

namespace {

void require_valid(const SearchSpace& space) {
    if (auto err = validate(space)) throw std::invalid_argument("search space: " + *err);
}

double clamp01(double u) { return std::min(1.0, std::max(0.0, u)); }

//: continuous position of value v on the (possibly log) axis of p, in [0,1]
double axis_to_unit(const ParameterSpec& p, double v) {
    if (p.log_scale) return (std::log(v) - std::log(p.low)) / (std::log(p.high) - std::log(p.low));
    return (v - p.low) / (p.high - p.low);
}

double axis_from_unit(const ParameterSpec& p, double u) {
    if (p.log_scale) return std::exp(std::log(p.low) + u * (std::log(p.high) - std::log(p.low)));
    return p.low + u * (p.high - p.low);
}

double round_to_feasible_int(const ParameterSpec& p, double raw) {
    double v = std::nearbyint(raw);
    v = std::min(p.high, std::max(p.low, v));
    return v;
}

}  // namespace

Configuration sample_uniform(const SearchSpace& space, Rng& rng) {
    require_valid(space);
    Configuration c;
    c.values.reserve(space.dimension());
    for (const auto& p : space.params) {
        switch (p.kind) {
            case ParamKind::continuous:
                c.values.push_back(axis_from_unit(p, uniform01(rng)));
                break;
            case ParamKind::integer:
                if (p.log_scale) {
                    c.values.push_back(round_to_feasible_int(p, axis_from_unit(p, uniform01(rng))));
                } else {
                    std::uniform_int_distribution<long long> d(static_cast<long long>(p.low),
                                                               static_cast<long long>(p.high));
                    c.values.push_back(static_cast<double>(d(rng)));
                }
                break;
            case ParamKind::categorical: {
                std::uniform_int_distribution<int> d(0, p.choice_count() - 1);
                c.values.push_back(static_cast<double>(d(rng)));
                break;
            }
        }
    }
    return c;
}

std::vector<double> to_unit(const SearchSpace& space, const Configuration& config) {
    require_valid(space);
    if (config.values.size() != space.dimension())
        throw std::invalid_argument("to_unit: configuration arity mismatch");
    if (!contains(space, config)) throw std::out_of_range("to_unit: configuration out of bounds");
    std::vector<double> u(space.dimension());
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& p = space.params[i];
        u[i] = p.kind == ParamKind::categorical ? config.values[i]
                                                : clamp01(axis_to_unit(p, config.values[i]));
    }
    return u;
}

Configuration from_unit(const SearchSpace& space, std::span<const double> unit) {
    require_valid(space);
    if (unit.size() != space.dimension())
        throw std::invalid_argument("from_unit: vector arity mismatch");
    Configuration c;
    c.values.reserve(space.dimension());
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& p = space.params[i];
        const double u = unit[i];
        if (p.kind == ParamKind::categorical) {
            const double idx = std::nearbyint(u);
            if (idx != u || idx < 0 || idx >= p.choice_count())
                throw std::out_of_range("from_unit: invalid choice index for '" + p.name + "'");
            c.values.push_back(idx);
            continue;
        }
        if (u < 0.0 || u > 1.0)
            throw std::out_of_range("from_unit: component for '" + p.name + "' outside [0,1]");
        const double raw = axis_from_unit(p, u);
        c.values.push_back(p.kind == ParamKind::integer ? round_to_feasible_int(p, raw)
                                                        : std::min(p.high, std::max(p.low, raw)));
    }
    return c;
}

bool contains(const SearchSpace& space, const Configuration& config) {
    if (config.values.size() != space.dimension()) return false;
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        const auto& p = space.params[i];
        const double v = config.values[i];
        if (p.kind == ParamKind::categorical) {
            if (v != std::floor(v) || v < 0 || v >= p.choice_count()) return false;
        } else {
            if (!(v >= p.low && v <= p.high)) return false;
            if (p.kind == ParamKind::integer && v != std::floor(v)) return false;
        }
    }
    return true;
}

}  // namespace pocaii
