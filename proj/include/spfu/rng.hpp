#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "spfu/tensor.hpp"

namespace spfu {

/// Seeded random source with a fully specified output stream.
///
/// Raw bits come from std::mt19937_64, whose sequence is fixed by the C++
/// standard. Uniform doubles take the top 53 bits: u = (x >> 11) * 2^-53,
/// giving u in [0, 1). Normal variates use the basic Box-Muller transform on
/// consecutive uniforms (u1, u2):
///
///   r = sqrt(-2 ln(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)
///
/// z0 is returned first and z1 is cached for the next call. Bounded integers
/// use rejection on the top bits so no modulo bias is introduced. None of the
/// std:: distributions are used, because their algorithms are left to the
/// implementation.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw InvalidParameter("SeededRng::below: bound must be positive");
    // Smallest all-ones mask covering bound - 1.
    std::uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      const std::uint64_t x = engine_() & mask;
      if (x < bound) return x;
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// I.i.d. standard-normal latent; deterministic given the generator state.
inline VideoLatent gaussian_latent(const Shape& shape, SeededRng& rng) {
  require_valid(shape);
  VideoLatent out(shape);
  for (float& v : out.data()) v = static_cast<float>(rng.normal());
  return out;
}

inline VideoLatent gaussian_latent(const Shape& shape, std::uint64_t seed) {
  SeededRng rng(seed);
  return gaussian_latent(shape, rng);
}

}  // namespace spfu
