#pragma once

#include <cstdint>
#include <random>

namespace pocaii {

//! splitmix64 finalizer; stable across platforms, used for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(mix64(a, b) ^ c);
}

using Rng = std::mt19937_64;

//: derive an independent generator for a named sub-stream
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0) {
    return Rng{mix64(seed, stream, tag)};
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>{0.0, 1.0}(rng);
}

}  // namespace pocaii
