#pragma once

// Seed derivation.  Every random stream in a run comes from
//   seed = mix(mix(master ^ fnv1a(purpose)) + replication)
// where mix is the splitmix64 finalizer, so streams for distinct
// (replication, purpose) pairs are independent and reproducible
// regardless of execution order.

#include "tensor_bandits/tensor.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace tb {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication,
                                    std::string_view purpose) noexcept {
    return splitmix64(splitmix64(master ^ fnv1a(purpose)) + replication);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t replication, std::string_view purpose) {
    return Rng(derive_seed(master, replication, purpose));
}

inline Index uniform_index(Index n, Rng& rng) {
    return std::uniform_int_distribution<Index>(0, n - 1)(rng);
}

/// Each coordinate uniform over its mode, independently.
inline Arm uniform_arm(const Dims& dims, Rng& rng) {
    Arm a;
    a.index.reserve(dims.size());
    for (Index p : dims) a.index.push_back(uniform_index(p, rng));
    return a;
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace tb
