#pragma once

#include "aoimix/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace aoimix {

using Rng = std::mt19937_64;

/// Stream tags keep environment randomness independent of policy randomness,
/// so two trainer modes run with one seed see identical fading and disturbances.
enum class Stream : std::uint64_t {
  kDisturbance = 1,
  kFading = 2,
  kPlacement = 3,
  kExpectedDelay = 4,
  kExploration = 10,
  kReplay = 11,
  kInit = 12,
  kInitialState = 13,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a global seed with a stream tag and any number of indices
/// (device, slot, ...) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                          std::initializer_list<std::uint64_t> indices = {});

inline Rng make_rng(std::uint64_t seed, Stream stream,
                    std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(seed, stream, indices));
}

/// Uniform draw from the closed L2 ball of the given radius in R^dim.
Vector sample_ball(Rng& rng, Eigen::Index dim, double radius);

}  // namespace aoimix
