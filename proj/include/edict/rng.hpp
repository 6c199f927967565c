#pragma once

#include <array>
#include <cstdint>

#include "edict/tensor.hpp"

namespace edict {

// xoshiro256** (Blackman & Vigna) with its 256-bit state expanded from the
// 64-bit seed by four SplitMix64 outputs. Uniform doubles take the top 53
// bits; normals come from the Box-Muller transform applied to consecutive
// uniform pairs (u1, u2): r = sqrt(-2 ln(1 - u1)), z0 = r cos(2 pi u2),
// z1 = r sin(2 pi u2), emitted in that order.
//
// Single owner. Not safe for concurrent use.
class SeededRng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256starstar-splitmix64-boxmuller";

  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// i.i.d. standard normal tensor. Throws ShapeError on an empty or zero-sized shape.
Tensor gaussian_draw(SeededRng& rng, const Shape& shape);

}  // namespace edict
