#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "spfu/tensor.hpp"

namespace spfu {

/// How a frequency bin is reduced to one normalized distance in [0, 1].
enum class DomainMode {
  temporal,  // |w_t| / pi
  radial,    // ||(w_t, w_h, w_w)|| / pi, clamped to 1
};

inline std::string_view to_string(DomainMode m) { return m == DomainMode::temporal ? "temporal" : "radial"; }

inline DomainMode parse_domain_mode(std::string_view s) {
  if (s == "temporal") return DomainMode::temporal;
  if (s == "radial") return DomainMode::radial;
  throw InvalidParameter("unknown domain mode '" + std::string(s) + "' (expected temporal or radial)");
}

/// Normalized angular frequency of bin k on an axis of length n, as a fraction
/// of pi: 2 min(k, n - k) / n, in [0, 1].
constexpr double bin_frequency(std::size_t k, std::size_t n) {
  const std::size_t m = std::min(k, n - k);
  return 2.0 * static_cast<double>(m) / static_cast<double>(n);
}

inline double bin_distance(const GridShape& g, std::size_t t, std::size_t h, std::size_t w, DomainMode mode) {
  const double ft = bin_frequency(t, g.frames);
  if (mode == DomainMode::temporal) return ft;
  const double fh = bin_frequency(h, g.height);
  const double fw = bin_frequency(w, g.width);
  return std::min(1.0, std::sqrt(ft * ft + fh * fh + fw * fw));
}

/// Real weights over a (T, H, W) frequency grid, broadcast over channels.
class FrequencyMask {
 public:
  FrequencyMask() = default;
  FrequencyMask(GridShape grid, DomainMode mode, std::vector<double> weights)
      : grid_(grid), mode_(mode), weights_(std::move(weights)) {
    if (grid_.size() == 0) throw InvalidShape("frequency mask grid must be non-empty");
    if (weights_.size() != grid_.size()) throw ShapeMismatch("mask weights do not match grid");
    for (double v : weights_)
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidParameter("mask weights must lie in [0, 1]");
  }

  static FrequencyMask constant(GridShape grid, DomainMode mode, double value) {
    return FrequencyMask(grid, mode, std::vector<double>(grid.size(), value));
  }

  const GridShape& grid() const { return grid_; }
  DomainMode mode() const { return mode_; }
  std::span<const double> weights() const { return weights_; }

  double operator()(std::size_t t, std::size_t h, std::size_t w) const {
    return weights_[(t * grid_.height + h) * grid_.width + w];
  }

  /// 1 - P, the complementary filter.
  FrequencyMask complement() const {
    std::vector<double> out(weights_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - weights_[i];
    return FrequencyMask(grid_, mode_, std::move(out));
  }

  /// Value at k equals value at -k (mod n) on every axis.
  bool conjugate_symmetric() const {
    for (std::size_t t = 0; t < grid_.frames; ++t)
      for (std::size_t h = 0; h < grid_.height; ++h)
        for (std::size_t w = 0; w < grid_.width; ++w) {
          const std::size_t nt = (grid_.frames - t) % grid_.frames;
          const std::size_t nh = (grid_.height - h) % grid_.height;
          const std::size_t nw = (grid_.width - w) % grid_.width;
          if ((*this)(t, h, w) != (*this)(nt, nh, nw)) return false;
        }
    return true;
  }

 private:
  GridShape grid_{};
  DomainMode mode_ = DomainMode::temporal;
  std::vector<double> weights_;
};

/// Gaussian low-pass exp(-d^2 / (2 d0^2)), d the normalized bin distance.
inline FrequencyMask gaussian_lowpass(GridShape grid, double d0, DomainMode mode = DomainMode::radial) {
  if (!(d0 > 0.0 && d0 <= 1.0)) throw InvalidParameter("gaussian_lowpass: d0 must lie in (0, 1]");
  if (grid.size() == 0) throw InvalidShape("gaussian_lowpass: empty grid");
  std::vector<double> weights(grid.size());
  std::size_t i = 0;
  for (std::size_t t = 0; t < grid.frames; ++t)
    for (std::size_t h = 0; h < grid.height; ++h)
      for (std::size_t w = 0; w < grid.width; ++w) {
        const double d = bin_distance(grid, t, h, w, mode);
        weights[i++] = std::exp(-(d * d) / (2.0 * d0 * d0));
      }
  return FrequencyMask(grid, mode, std::move(weights));
}

/// Band edges (fractions of pi) produced by a branch scale: the Nyquist limit
/// of a window alpha * T_alpha frames long is pi / (2 alpha).
constexpr double nyquist_edge(unsigned alpha) { return 1.0 / (2.0 * static_cast<double>(alpha)); }

// Bins lying within this distance of an edge count as on the edge.
inline constexpr double kEdgeTolerance = 1e-12;

/// Closed frequency interval [lo, hi] kept by one branch, as fractions of pi.
struct BandSpec {
  unsigned alpha = 1;
  double lo = 0.0;
  double hi = 1.0;
};

inline void require_ascending_alphas(const std::vector<unsigned>& alphas) {
  if (alphas.empty()) throw InvalidParameter("alpha list must not be empty");
  if (alphas.front() < 1) throw InvalidParameter("alphas must be >= 1");
  for (std::size_t i = 1; i < alphas.size(); ++i)
    if (alphas[i] <= alphas[i - 1]) throw InvalidParameter("alphas must be strictly ascending");
}

/// Band for each alpha (same order as input, ascending alpha = fine to coarse).
/// The coarsest keeps [0, 1/(2 a_L)], intermediate a_l keeps
/// (1/(2 a_{l+1}), 1/(2 a_l)], and the finest extends up to 1 (i.e. pi).
inline std::vector<BandSpec> band_specs(const std::vector<unsigned>& alphas) {
  require_ascending_alphas(alphas);
  const std::size_t L = alphas.size();
  std::vector<BandSpec> out(L);
  for (std::size_t l = 0; l < L; ++l) {
    out[l].alpha = alphas[l];
    out[l].hi = (l == 0) ? 1.0 : nyquist_edge(alphas[l]);
    out[l].lo = (l + 1 < L) ? nyquist_edge(alphas[l + 1]) : 0.0;
  }
  return out;
}

/// Index (into band_specs order) of the band owning normalized frequency f.
/// A bin exactly on an edge belongs to the lower (coarser) band.
inline std::size_t owning_band(const std::vector<BandSpec>& bands, double f) {
  // Walk coarse to fine.
  for (std::size_t l = bands.size(); l-- > 0;)
    if (f <= bands[l].hi + kEdgeTolerance) return l;
  return 0;
}

/// Hard band-pass indicators, one per alpha. They sum to exactly 1 per bin.
inline std::vector<FrequencyMask> band_masks(const std::vector<unsigned>& alphas, GridShape grid,
                                             DomainMode mode = DomainMode::temporal) {
  const auto bands = band_specs(alphas);
  if (grid.size() == 0) throw InvalidShape("band_masks: empty grid");
  std::vector<std::vector<double>> weights(bands.size(), std::vector<double>(grid.size(), 0.0));
  std::size_t i = 0;
  for (std::size_t t = 0; t < grid.frames; ++t)
    for (std::size_t h = 0; h < grid.height; ++h)
      for (std::size_t w = 0; w < grid.width; ++w, ++i)
        weights[owning_band(bands, bin_distance(grid, t, h, w, mode))][i] = 1.0;
  std::vector<FrequencyMask> out;
  out.reserve(bands.size());
  for (auto& w : weights) out.emplace_back(grid, mode, std::move(w));
  return out;
}

/// Largest deviation of sum_l P_l from 1 over the grid.
inline double partition_error(const std::vector<FrequencyMask>& masks) {
  if (masks.empty()) return 1.0;
  const std::size_t n = masks.front().grid().size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& m : masks) sum += m.weights()[i];
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

/// Elementwise complex-by-real product, mask broadcast over channels.
inline SpectralTensor apply_mask(const SpectralTensor& X, const FrequencyMask& m) {
  if (grid_of(X.shape()) != m.grid()) throw ShapeMismatch("apply_mask: mask grid does not match spectrum");
  SpectralTensor out = X;
  auto data = out.data();
  const auto w = m.weights();
  const std::size_t g = w.size();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] *= w[i % g];
  return out;
}

}  // namespace spfu
