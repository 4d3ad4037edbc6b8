#pragma once

#include <cstdint>
#include <random>

namespace qrlab {

/// Consumers of randomness inside one experiment. Each gets an independent
/// substream of the master seed.
enum class Stream : std::uint64_t {
  data = 1,
  teacher = 2,
  noise = 3,
  test_points = 4,
  covariance = 5,
  projector = 6,
  monte_carlo = 7,
};

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based seed derivation: the result depends only on
/// (master, stream, index), never on evaluation order.
std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                          std::uint64_t index = 0) noexcept;

inline Engine make_engine(std::uint64_t master, Stream stream,
                          std::uint64_t index = 0) {
  return Engine(derive_seed(master, stream, index));
}

}  // namespace qrlab
