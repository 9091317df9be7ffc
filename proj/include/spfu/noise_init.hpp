#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spfu/fft.hpp"
#include "spfu/rng.hpp"
#include "spfu/tensor.hpp"

namespace spfu {

/// Axes transformed before per-frame mixing.
///  spatial:        FFT over (H, W); index t is a frame.
///  spatiotemporal: full 3D FFT; index t is a temporal-frequency bin. The
///                  per-index weights are not symmetric under t -> -t, so the
///                  inverse is not exactly real and its imaginary part is dropped.
enum class SpecMixDomain { spatial, spatiotemporal };

inline SpecMixDomain parse_specmix_domain(std::string_view s) {
  if (s == "spatial") return SpecMixDomain::spatial;
  if (s == "spatiotemporal" || s == "full3d") return SpecMixDomain::spatiotemporal;
  throw InvalidParameter("unknown SpecMix domain '" + std::string(s) + "' (expected spatial or spatiotemporal)");
}

struct SpecMixParams {
  std::size_t frames = 0;
  std::size_t t_alpha = 0;
  std::uint64_t seed_base = 0;
  std::uint64_t seed_res = 1;
  std::uint64_t seed_perm = 2;
  SpecMixDomain domain = SpecMixDomain::spatial;

  /// Derives the three seeds from one user-facing seed.
  static SpecMixParams from_seed(std::size_t frames, std::size_t t_alpha, std::uint64_t seed) {
    return {frames, t_alpha, mix_seed(seed, 0), mix_seed(seed, 1), mix_seed(seed, 2), SpecMixDomain::spatial};
  }
};

/// (channels, height, width) of one frame.
struct FrameShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

inline void require_valid(const SpecMixParams& p) {
  if (p.t_alpha == 0) throw InvalidParameter("t_alpha must be >= 1");
  if (p.frames < p.t_alpha) throw InvalidParameter("SpecMix needs T >= t_alpha");
}

/// Fisher-Yates shuffle of 0..n-1.
inline std::vector<std::size_t> random_permutation(std::size_t n, SeededRng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

/// Consistency base noise: the first T_alpha frames are fresh Gaussian noise,
/// and every later window of T_alpha frames is a seeded permutation of those
/// frames. A trailing partial window takes the leading entries of its
/// permutation.
inline VideoLatent base_noise(const SpecMixParams& p, const FrameShape& fs) {
  require_valid(p);
  const Shape window_shape{fs.channels, p.t_alpha, fs.height, fs.width};
  const VideoLatent first = gaussian_latent(window_shape, p.seed_base);
  const Shape shape{fs.channels, p.frames, fs.height, fs.width};
  VideoLatent out(shape);
  SeededRng perm_rng(p.seed_perm);
  for (std::size_t start = 0; start < p.frames; start += p.t_alpha) {
    std::vector<std::size_t> source(p.t_alpha);
    if (start == 0) std::iota(source.begin(), source.end(), std::size_t{0});
    else source = random_permutation(p.t_alpha, perm_rng);
    const std::size_t len = std::min(p.t_alpha, p.frames - start);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < fs.channels; ++c)
        for (std::size_t h = 0; h < fs.height; ++h)
          for (std::size_t w = 0; w < fs.width; ++w) out(c, start + i, h, w) = first(c, source[i], h, w);
  }
  return out;
}

/// |t - (T-1)/2| / ((T-1)/2); a single frame counts as the centre.
inline double center_distance(std::size_t t, std::size_t frames) {
  if (frames == 0 || t >= frames) throw InvalidParameter("center_distance: need 0 <= t < T");
  if (frames == 1) return 0.0;
  const double half = (static_cast<double>(frames) - 1.0) / 2.0;
  return std::abs(static_cast<double>(t) - half) / half;
}

inline double mixing_angle(double d) { return d * std::numbers::pi / 2.0; }

/// (cos theta, sin theta) for theta = d * pi / 2, exact at d = 0 and d = 1.
inline std::pair<double, double> mixing_weights(double d) {
  if (d == 0.0) return {1.0, 0.0};
  if (d == 1.0) return {0.0, 1.0};
  const double theta = mixing_angle(d);
  return {std::cos(theta), std::sin(theta)};
}

struct SpecMixResult {
  VideoLatent base;
  VideoLatent residual;
  SpectralTensor base_spectrum;
  SpectralTensor residual_spectrum;
  SpectralTensor mixed_spectrum;
  VideoLatent initial_noise;
};

/// Mixes base and residual spectra slice by slice with cos/sin weights taken
/// from each slice's distance to the sequence centre.
inline SpecMixResult specmix_detailed(const SpecMixParams& p, const FrameShape& fs) {
  require_valid(p);
  const Shape shape{fs.channels, p.frames, fs.height, fs.width};
  require_valid(shape);
  SpecMixResult r;
  r.base = base_noise(p, fs);
  r.residual = gaussian_latent(shape, p.seed_res);
  const TransformAxes axes =
      p.domain == SpecMixDomain::spatial ? TransformAxes::spatial : TransformAxes::spatiotemporal;
  r.base_spectrum = fft3(r.base, axes);
  r.residual_spectrum = fft3(r.residual, axes);
  r.mixed_spectrum = SpectralTensor(shape);
  for (std::size_t t = 0; t < p.frames; ++t) {
    const auto [wb, wr] = mixing_weights(center_distance(t, p.frames));
    for (std::size_t c = 0; c < fs.channels; ++c)
      for (std::size_t h = 0; h < fs.height; ++h)
        for (std::size_t w = 0; w < fs.width; ++w)
          r.mixed_spectrum(c, t, h, w) = wb * r.base_spectrum(c, t, h, w) + wr * r.residual_spectrum(c, t, h, w);
  }
  r.initial_noise = ifft3(r.mixed_spectrum, axes);
  return r;
}

inline VideoLatent specmix(const SpecMixParams& p, const FrameShape& fs) {
  return specmix_detailed(p, fs).initial_noise;
}

}  // namespace spfu
