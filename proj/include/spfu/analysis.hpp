#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "spfu/attention.hpp"
#include "spfu/fft.hpp"
#include "spfu/masks.hpp"
#include "spfu/tensor.hpp"

namespace spfu {

inline constexpr double kAvailabilityThreshold = 0.9;
inline constexpr std::size_t kDefaultBandCount = 16;

// Band edges here are interior cut points in normalized frequency (1 = pi),
// strictly ascending inside (0, 1). n cut points give n + 1 bands tiling
// [0, 1]; a bin exactly on a cut point belongs to the lower band.

inline void require_band_edges(const std::vector<double>& edges) {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!(edges[i] > 0.0 && edges[i] < 1.0)) throw InvalidParameter("band edges must lie strictly inside (0, 1)");
    if (i > 0 && edges[i] <= edges[i - 1]) throw InvalidParameter("band edges must be strictly ascending");
  }
}

/// n equal-width bands over [0, pi].
inline std::vector<double> uniform_band_edges(std::size_t bands) {
  if (bands == 0) throw InvalidParameter("band count must be >= 1");
  std::vector<double> edges;
  for (std::size_t i = 1; i < bands; ++i) edges.push_back(static_cast<double>(i) / static_cast<double>(bands));
  return edges;
}

inline std::size_t band_of(const std::vector<double>& edges, double f) {
  std::size_t b = 0;
  while (b < edges.size() && f > edges[b] + kEdgeTolerance) ++b;
  return b;
}

/// sum |X(k)|^2 per band, X the orthonormal 3D spectrum.
inline std::vector<double> band_energy(const VideoLatent& x, const std::vector<double>& edges,
                                       DomainMode mode = DomainMode::temporal) {
  require_band_edges(edges);
  const SpectralTensor X = fft3(x);
  const Shape& s = x.shape();
  const GridShape g = grid_of(s);
  std::vector<double> out(edges.size() + 1, 0.0);
  std::vector<std::size_t> bin_band(g.size());
  std::size_t i = 0;
  for (std::size_t t = 0; t < g.frames; ++t)
    for (std::size_t h = 0; h < g.height; ++h)
      for (std::size_t w = 0; w < g.width; ++w) bin_band[i++] = band_of(edges, bin_distance(g, t, h, w, mode));
  const auto data = X.data();
  for (std::size_t k = 0; k < data.size(); ++k) out[bin_band[k % g.size()]] += std::norm(data[k]);
  return out;
}

struct SnrReport {
  std::vector<double> band_edges;  // cut points, normalized
  std::vector<double> ratios;
  std::size_t available_count = 0;
  double threshold = kAvailabilityThreshold;

  double band_lo(std::size_t b) const { return b == 0 ? 0.0 : band_edges[b - 1]; }
  double band_hi(std::size_t b) const { return b == band_edges.size() ? 1.0 : band_edges[b]; }
  bool available(std::size_t b) const { return ratios[b] >= threshold; }
};

/// Relative spectral profile of an extended sequence against a reference:
/// per band, (E_ext(b) / E_ext) / (E_ref(b) / E_ref). Bands with no reference
/// energy get ratio 1 if the extended sequence has none there either, else
/// the ratio is reported as 0 (the band cannot be compared).
inline SnrReport relative_snr(const VideoLatent& reference, const VideoLatent& extended,
                              const std::vector<double>& edges, double threshold = kAvailabilityThreshold,
                              DomainMode mode = DomainMode::temporal) {
  const auto ref = band_energy(reference, edges, mode);
  const auto ext = band_energy(extended, edges, mode);
  double ref_total = 0.0;
  double ext_total = 0.0;
  for (double e : ref) ref_total += e;
  for (double e : ext) ext_total += e;
  if (!(ref_total > 0.0)) throw DegenerateInput("reference latent has zero spectral energy");
  if (!(ext_total > 0.0)) throw DegenerateInput("extended latent has zero spectral energy");

  SnrReport r;
  r.band_edges = edges;
  r.threshold = threshold;
  for (std::size_t b = 0; b < ref.size(); ++b) {
    const double ref_frac = ref[b] / ref_total;
    const double ext_frac = ext[b] / ext_total;
    double ratio = 0.0;
    if (ref_frac > 0.0) ratio = ext_frac / ref_frac;
    else if (ext_frac == 0.0) ratio = 1.0;
    r.ratios.push_back(ratio);
    if (ratio >= threshold) ++r.available_count;
  }
  return r;
}

namespace detail {
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, res.ptr);
}
}  // namespace detail

/// CSV rows: band_lo,band_hi,ratio,available (band edges in units of pi).
inline std::string to_csv(const SnrReport& r) {
  std::string out = "band_lo,band_hi,ratio,available\n";
  for (std::size_t b = 0; b < r.ratios.size(); ++b)
    out += detail::format_number(r.band_lo(b)) + "," + detail::format_number(r.band_hi(b)) + "," +
           detail::format_number(r.ratios[b]) + "," + (r.available(b) ? "1" : "0") + "\n";
  return out;
}

inline std::string to_text(const SnrReport& r) {
  std::string out;
  for (std::size_t b = 0; b < r.ratios.size(); ++b)
    out += "band " + std::to_string(b) + " [" + detail::format_number(r.band_lo(b)) + "pi, " +
           detail::format_number(r.band_hi(b)) + "pi] ratio " + detail::format_number(r.ratios[b]) +
           (r.available(b) ? " available\n" : " distorted\n");
  out += "available " + std::to_string(r.available_count) + "/" + std::to_string(r.ratios.size()) +
         " at threshold " + detail::format_number(r.threshold) + "\n";
  return out;
}

/// Frame-level attention map, rows summing to 1.
struct AttnMap {
  std::size_t frames = 0;
  std::vector<double> weights;  // frames x frames, row-major
  std::size_t source_count = 0; // number of token-level maps averaged

  double operator()(std::size_t i, std::size_t j) const { return weights[i * frames + j]; }
};

/// Pools each token-level map to frames (mean over the token pairs of each
/// frame pair), averages across maps, then renormalizes rows.
inline AttnMap aggregate_attention(const std::vector<Matrix>& maps, std::size_t frames) {
  if (maps.empty()) throw InvalidParameter("aggregate_attention: empty collection");
  if (frames == 0) throw InvalidParameter("aggregate_attention: T must be >= 1");
  const std::size_t n = maps.front().rows();
  if (n % frames != 0) throw ShapeMismatch("token count is not a multiple of T");
  const std::size_t per = n / frames;
  AttnMap out;
  out.frames = frames;
  out.source_count = maps.size();
  out.weights.assign(frames * frames, 0.0);
  for (const Matrix& m : maps) {
    if (m.rows() != n || m.cols() != n) throw ShapeMismatch("attention maps must all be n x n");
    std::vector<double> pooled(frames * frames, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) pooled[(a / per) * frames + b / per] += m(a, b);
    const double inv = 1.0 / static_cast<double>(per * per) / static_cast<double>(maps.size());
    for (std::size_t k = 0; k < pooled.size(); ++k) out.weights[k] += pooled[k] * inv;
  }
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < frames; ++j) sum += out.weights[i * frames + j];
    if (!(sum > 0.0)) throw DegenerateInput("attention map row " + std::to_string(i) + " has no mass");
    for (std::size_t j = 0; j < frames; ++j) out.weights[i * frames + j] /= sum;
  }
  return out;
}

/// Half-width of the diagonal band: max(1, floor(T / 16)).
inline std::size_t diagonal_halfwidth(std::size_t frames) { return std::max<std::size_t>(1, frames / 16); }

/// Fraction of total mass with |i - j| <= max(1, T / 16).
inline double diagonality(const AttnMap& map) {
  const std::size_t band = diagonal_halfwidth(map.frames);
  double near = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < map.frames; ++i)
    for (std::size_t j = 0; j < map.frames; ++j) {
      const double v = map(i, j);
      total += v;
      if ((i > j ? i - j : j - i) <= band) near += v;
    }
  return total > 0.0 ? near / total : 0.0;
}

inline std::string to_csv(const AttnMap& map) {
  std::string out;
  for (std::size_t i = 0; i < map.frames; ++i) {
    for (std::size_t j = 0; j < map.frames; ++j) {
      if (j) out += ',';
      out += detail::format_number(map(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace spfu
