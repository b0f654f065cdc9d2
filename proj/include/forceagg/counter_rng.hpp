#pragma once
// Stateless counter-based uniform numbers: the value is a pure function of
// (seed, stream, counter, lane), so any draw can be reproduced or re-ordered
// without carrying generator state around.

#include <cstdint>

namespace forceagg {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                     std::uint64_t lane) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ counter);
    return splitmix64(h ^ lane);
}

// Uniform in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                                 std::uint64_t lane) {
    return static_cast<double>(counter_hash(seed, stream, counter, lane) >> 11) * 0x1.0p-53;
}

}  // namespace forceagg
