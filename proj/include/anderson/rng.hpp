#pragma once

// Counter-based randomness: every draw is a pure function of
// (seed, stream, counter, site), so values never depend on iteration order.

#include <bit>
#include <cstdint>

#include "anderson/lattice.hpp"

namespace anderson::rng {

/// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept
{
    return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hash_double(std::uint64_t h, double v) noexcept
{
    if (v == 0.0) v = 0.0;  // -0 and +0 hash alike
    return combine(h, std::bit_cast<std::uint64_t>(v));
}

inline std::uint64_t site_key(std::uint64_t seed, std::uint64_t counter, const Site& site) noexcept
{
    std::uint64_t h = combine(mix64(seed), counter);
    h = combine(h, site.size());
    for (int c : site) h = combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
    return h;
}

/// Uniform in the open interval (0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t h) noexcept
{
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

inline double site_uniform(std::uint64_t seed, std::uint64_t counter, const Site& site) noexcept
{
    return to_unit(site_key(seed, counter, site));
}

/// Derives an independent 64-bit seed for a sub-task.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) noexcept { return combine(mix64(seed ^ 0xa0761d6478bd642fULL), tag); }

}  // namespace anderson::rng
