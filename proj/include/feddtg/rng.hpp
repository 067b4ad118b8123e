#pragma once

#include <cstdint>
#include <random>

namespace feddtg {

/// Tags separating the independent random streams used inside one round.
enum class StreamTag : std::uint64_t {
    init = 1,
    selection = 2,
    local_batches = 3,
    local_gan = 4,
    distill_noise = 5,
    distill_batches = 6,
    partition = 7,
    subsample = 8,
    mixture = 9,
    baseline = 10,
    test_partition = 11,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hashes an ordered list of words into a seed. Streams are derived, never
/// shared, so client work can run in any order with identical results.
template <typename... Words>
std::uint64_t derive_seed(std::uint64_t base, Words... words) {
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(words))), ...);
    return h;
}

using Rng = std::mt19937_64;

template <typename... Words>
Rng derive_stream(std::uint64_t global_seed, Words... words) {
    return Rng(derive_seed(global_seed, words...));
}

}  // namespace feddtg
