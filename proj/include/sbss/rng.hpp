#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sbss {

using Rng = std::mt19937_64;

/// Mixes a 64-bit value (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Generator for the substream identified by (seed, keys...). The result
/// depends only on its arguments, so replications can be drawn in any order.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

}  // namespace sbss
