#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace cmanifold {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a key path, so
/// every (seed, key...) pair owns its own generator regardless of call order.
inline std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(seed);
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    return std::mt19937_64(stream_seed(seed, keys));
}

// Stream tags, kept distinct so streams never collide.
namespace stream {
inline constexpr std::uint64_t basis = 1;
inline constexpr std::uint64_t group = 2;
inline constexpr std::uint64_t answer = 3;
inline constexpr std::uint64_t record = 4;
inline constexpr std::uint64_t folds = 5;
inline constexpr std::uint64_t fewshot = 6;
inline constexpr std::uint64_t steering = 7;
inline constexpr std::uint64_t kmeans = 8;
inline constexpr std::uint64_t spikes = 9;
}  // namespace stream

/// Uniform index in [0, n) from raw engine bits (rejection sampling), so the
/// sequence does not depend on the standard library's distributions.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t range = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    for (;;) {
        const std::uint64_t v = rng();
        if (v < limit) return static_cast<std::size_t>(v % range);
    }
}

template <class It>
void seeded_shuffle(It first, It last, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = uniform_index(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace cmanifold
