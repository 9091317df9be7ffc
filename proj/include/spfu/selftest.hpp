#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "spfu/analysis.hpp"
#include "spfu/attention.hpp"
#include "spfu/fft.hpp"
#include "spfu/fusion.hpp"
#include "spfu/harness.hpp"
#include "spfu/masks.hpp"
#include "spfu/noise_init.hpp"
#include "spfu/rng.hpp"
#include "spfu/tensor_io.hpp"

// Runtime invariant checks across all modules. Sizes are kept small so the
// whole suite finishes in a few seconds; every check is seeded, so the report
// is byte-identical between runs.

namespace spfu {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest_detail {

inline std::string num(double v) { return detail::format_number(v); }

inline SelfTestResult check(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, std::move(detail)};
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.normal());
  return m;
}

inline TokenSequence random_tokens(std::size_t frames, std::size_t h, std::size_t w, std::size_t d,
                                   std::uint64_t seed) {
  SeededRng rng(seed);
  return make_tokens(random_matrix(frames * h * w, d, rng), frames, h, w);
}

// Attention through the explicit weight matrix: a second route to the output.
inline Matrix attention_via_weights(const Matrix& q, const Matrix& k, const Matrix& v,
                                    std::span<const std::size_t> frame_index, const FrameAdmission& adm) {
  const Matrix a = attention_weights(q, k, frame_index, adm);
  Matrix out(q.rows(), v.cols());
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t c = 0; c < v.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k.rows(); ++j) acc += static_cast<double>(a(i, j)) * v(j, c);
      out(i, c) = static_cast<float>(acc);
    }
  return out;
}

}  // namespace selftest_detail

inline std::vector<SelfTestResult> run_selftest() {
  using namespace selftest_detail;
  std::vector<SelfTestResult> results;
  auto add = [&](SelfTestResult r) { results.push_back(std::move(r)); };

  // tensor_core
  {
    const VideoLatent x = gaussian_latent({2, 3, 4, 5}, 11);
    const auto bytes = encode_tensor(x);
    const VideoLatent y = decode_tensor(bytes);
    add(check("tensor.io_roundtrip", x == y && encode_tensor(y) == bytes, "2x3x4x5 write/read"));
    add(check("tensor.gaussian_deterministic", gaussian_latent({1, 4, 4, 4}, 5) == gaussian_latent({1, 4, 4, 4}, 5),
              "seed 5 twice"));
  }

  // spectral
  {
    const VideoLatent x = gaussian_latent({4, 32, 16, 16}, 21);
    const SpectralTensor X = fft3(x);
    const double rt = max_abs_diff(ifft3(X), x);
    const double ex = energy(x);
    const double parseval = std::abs(ex - energy(X)) / ex;
    add(check("spectral.fft_roundtrip", rt <= 1e-4, "max-abs " + num(rt)));
    add(check("spectral.parseval", parseval <= 1e-5, "relative " + num(parseval)));

    double worst = 0.0;
    for (const auto& alphas : std::vector<std::vector<unsigned>>{{1}, {1, 2}, {1, 2, 4}, {1, 2, 4, 8}, {2, 3, 7}})
      for (auto mode : {DomainMode::temporal, DomainMode::radial})
        worst = std::max(worst, partition_error(band_masks(alphas, {16, 6, 5}, mode)));
    add(check("spectral.band_partition", worst == 0.0, "max |sum P_l - 1| = " + num(worst)));

    const VideoLatent small = gaussian_latent({2, 9, 6, 7}, 3);
    double residue = 0.0;
    for (const auto& m : band_masks({1, 2, 4}, grid_of(small.shape()), DomainMode::radial))
      residue = std::max(residue, max_imag(ifft3_complex(apply_mask(fft3(small), m))));
    residue = std::max(residue, max_imag(ifft3_complex(apply_mask(fft3(small), gaussian_lowpass(grid_of(small.shape()), 0.25)))));
    add(check("spectral.mask_symmetry_real_output", residue <= 1e-5, "max imag " + num(residue)));

    const GridShape g{12, 8, 8};
    const FrequencyMask lpf = gaussian_lowpass(g, 0.25, DomainMode::radial);
    std::vector<std::pair<double, double>> pts;
    for (std::size_t t = 0; t < g.frames; ++t)
      for (std::size_t h = 0; h < g.height; ++h)
        for (std::size_t w = 0; w < g.width; ++w) pts.emplace_back(bin_distance(g, t, h, w, lpf.mode()), lpf(t, h, w));
    std::sort(pts.begin(), pts.end());
    bool mono = lpf(0, 0, 0) == 1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      mono = mono && pts[i].second > 0.0 && pts[i].second <= 1.0;
      if (i > 0) mono = mono && pts[i].second <= pts[i - 1].second;
    }
    add(check("spectral.lowpass_monotone", mono, "weights in (0,1], non-increasing in distance"));
  }

  // attention
  {
    const std::size_t T = 6, H = 2, W = 3, d = 5;
    SeededRng rng(31);
    const Matrix q = random_matrix(T * H * W, d, rng), k = random_matrix(T * H * W, d, rng),
                 v = random_matrix(T * H * W, d, rng);
    const auto fi = frame_indices(T, H * W);

    const Matrix a = attention_weights(q, k, fi, window_admission(AttentionWindow::local(4), T));
    double worst_row = 0.0;
    bool nonneg = true;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        s += a(i, j);
        nonneg = nonneg && a(i, j) >= 0.0f;
      }
      worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
    add(check("attention.convex_rows", nonneg && worst_row <= 1e-6, "max |row sum - 1| " + num(worst_row)));

    const Matrix g = global_attention(q, k, v, fi);
    const double wide = max_abs_diff(masked_attention(q, k, v, fi, AttentionWindow::local(2 * T)), g);
    add(check("attention.wide_window_is_global", wide <= 1e-6, "max-abs " + num(wide)));

    std::vector<std::size_t> all(T);
    std::iota(all.begin(), all.end(), std::size_t{0});
    add(check("attention.sparse_all_frames_exact", sparse_attention(q, k, v, fi, all) == g, "bitwise"));

    const auto adm = window_admission(AttentionWindow::local(4), T);
    const double routes = max_abs_diff(admitted_attention(q, k, v, fi, adm), attention_via_weights(q, k, v, fi, adm));
    add(check("attention.weight_route_agrees", routes <= 1e-6, "max-abs " + num(routes)));

    // One-hot logits: query frame i points at key frame target(i) = min(i + 1, T - 1).
    const std::size_t Tl = 8;
    Matrix qh(Tl, Tl), kh(Tl, Tl);
    for (std::size_t i = 0; i < Tl; ++i) {
      qh(i, std::min(i + 1, Tl - 1)) = 20.0f;
      kh(i, i) = 1.0f;
    }
    const auto fil = frame_indices(Tl, 1);
    bool argmax_stable = true;
    for (std::size_t span : {4u, 6u, 8u, 16u}) {
      const Matrix wts = attention_weights(qh, kh, fil, window_admission(AttentionWindow::local(span), Tl));
      for (std::size_t i = 0; i < Tl; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < Tl; ++j)
          if (wts(i, j) > wts(i, best)) best = j;
        argmax_stable = argmax_stable && best == std::min(i + 1, Tl - 1);
      }
    }
    add(check("attention.monotone_locality", argmax_stable, "argmax key stays inside shrinking windows"));

    // Swap two tokens inside frame 2.
    std::vector<std::size_t> perm(T * H * W);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::swap(perm[2 * H * W], perm[2 * H * W + 4]);
    auto permute = [&](const Matrix& m) {
      Matrix out(m.rows(), m.cols());
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(perm[r], c);
      return out;
    };
    const auto win = AttentionWindow::local(4);
    const double equiv = max_abs_diff(masked_attention(permute(q), permute(k), permute(v), fi, win),
                                      permute(masked_attention(q, k, v, fi, win)));
    add(check("attention.within_frame_equivariance", equiv <= 1e-6, "max-abs " + num(equiv)));
  }

  // fusion
  {
    const std::size_t Ta = 4;
    const TokenSequence tok = random_tokens(2 * Ta, 3, 3, 4, 41);
    const QkvWeights w = random_qkv(4, 42);
    const GridShape grid{tok.frames, tok.height, tok.width};

    const FusionPlan two = make_freelong_plan(Ta, grid);
    const double red = max_abs_diff(freelong_pp_attention(tok, w, two).features, freelong_attention(tok, w, two).features);
    add(check("fusion.two_branch_reduction", red <= 1e-5, "max-abs " + num(red)));

    const TokenSequence shorter = random_tokens(Ta, 3, 3, 4, 43);
    const Qkv qkv = project_qkv(shorter, w);
    const Matrix plain = global_attention(qkv.q, qkv.k, qkv.v, shorter.frame_index);
    const GridShape sg{shorter.frames, shorter.height, shorter.width};
    double idem = 0.0;
    PlanConfig multi;
    multi.t_alpha = Ta;
    idem = std::max(idem, max_abs_diff(freelong_pp_attention(shorter, w, multi.materialize(sg)).features, plain));
    idem = std::max(idem, max_abs_diff(freelong_attention(shorter, w, make_freelong_plan(Ta, sg)).features, plain));
    add(check("fusion.short_input_idempotent", idem <= 1e-4, "max-abs " + num(idem)));

    const TokenSequence longer = random_tokens(4 * Ta, 2, 2, 4, 44);
    const GridShape lg{longer.frames, longer.height, longer.width};
    const FusionPlan dense = make_multiband_plan(Ta, {1, 2, 4}, lg, false);
    const FusionPlan sparse = make_multiband_plan(Ta, {1, 2, 4}, lg, true);
    FusionTrace td, ts;
    const TokenSequence out_dense = freelong_pp_attention(longer, w, dense, &td);
    freelong_pp_attention(longer, w, sparse, &ts);

    const SpectralTensor Z = fft3(latent_from_tokens(out_dense));
    double own = 0.0;
    double bound_out = 0.0, bound_max = 0.0;
    std::vector<SpectralTensor> branch_spectra;
    for (const auto& b : td.branch_outputs) branch_spectra.push_back(fft3(b));
    const Shape s = Z.shape();
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t t = 0; t < s.frames; ++t)
        for (std::size_t h = 0; h < s.height; ++h)
          for (std::size_t x = 0; x < s.width; ++x) {
            double best = 0.0;
            for (std::size_t l = 0; l < dense.branches.size(); ++l) {
              best = std::max(best, std::norm(branch_spectra[l](c, t, h, x)));
              if (dense.branches[l].mask(t, h, x) == 1.0)
                own = std::max(own, std::abs(Z(c, t, h, x) - branch_spectra[l](c, t, h, x)));
            }
            bound_out += std::norm(Z(c, t, h, x));
            bound_max += best;
          }
    add(check("fusion.band_ownership", own <= 1e-4, "max bin error " + num(own)));
    add(check("fusion.energy_bound", bound_out <= bound_max * (1.0 + 1e-6), num(bound_out) + " <= " + num(bound_max)));

    bool untouched = true, changed = false;
    const auto& coarse = dense.branches.back().mask;
    for (std::size_t i = 0; i < td.fused_spectrum.size(); ++i) {
      const std::size_t g = i % lg.size();
      const bool in_coarse = coarse.weights()[g] == 1.0;
      const bool same = td.fused_spectrum.data()[i] == ts.fused_spectrum.data()[i];
      if (!in_coarse) untouched = untouched && same;
      else changed = changed || !same;
    }
    add(check("fusion.sparse_substitution_local", untouched && changed, "only the coarsest band differs"));
  }

  // noise_init
  {
    const FrameShape fs{2, 4, 4};
    const auto p = SpecMixParams::from_seed(9, 4, 17);
    const SpecMixResult r = specmix_detailed(p, fs);
    bool limits = true;
    for (std::size_t c = 0; c < fs.channels; ++c)
      for (std::size_t h = 0; h < fs.height; ++h)
        for (std::size_t w = 0; w < fs.width; ++w) {
          limits = limits && r.mixed_spectrum(c, 4, h, w) == r.base_spectrum(c, 4, h, w);
          limits = limits && r.mixed_spectrum(c, 0, h, w) == r.residual_spectrum(c, 0, h, w);
          limits = limits && r.mixed_spectrum(c, 8, h, w) == r.residual_spectrum(c, 8, h, w);
        }
    add(check("noise.center_endpoint_limits", limits, "exact spectral equality"));
    add(check("noise.deterministic", specmix(p, fs) == r.initial_noise, "same seeds, same x0"));

    bool sym = true;
    for (std::size_t T : {2u, 5u, 8u, 33u})
      for (std::size_t t = 0; t < T; ++t) sym = sym && center_distance(t, T) == center_distance(T - 1 - t, T);
    add(check("noise.distance_symmetry", sym, "d_t = d_{T-1-t}"));

    const std::size_t T = 12, draws = 200;
    std::vector<double> sumsq(T, 0.0);
    std::size_t per_slice = 0;
    for (std::size_t sd = 0; sd < draws; ++sd) {
      const VideoLatent x0 = specmix(SpecMixParams::from_seed(T, 4, 1000 + sd), fs);
      per_slice = 0;
      for (std::size_t c = 0; c < fs.channels; ++c)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t h = 0; h < fs.height; ++h)
            for (std::size_t w = 0; w < fs.width; ++w) sumsq[t] += static_cast<double>(x0(c, t, h, w)) * x0(c, t, h, w);
      per_slice = fs.channels * fs.height * fs.width;
    }
    double worst = 0.0;
    for (double s : sumsq) worst = std::max(worst, std::abs(s / static_cast<double>(draws * per_slice) - 1.0));
    add(check("noise.variance_preserved", worst <= 0.1, "max |var - 1| " + num(worst)));
  }

  // analysis
  {
    const VideoLatent x = gaussian_latent({2, 16, 6, 6}, 51);
    const auto edges = uniform_band_edges(kDefaultBandCount);
    const auto be = band_energy(x, edges);
    const double total = std::accumulate(be.begin(), be.end(), 0.0);
    const double err = std::abs(total - energy(x)) / energy(x);
    add(check("analysis.band_energy_sums_to_total", err <= 1e-5, "relative " + num(err)));

    VideoLatent scaled = gaussian_latent({2, 16, 6, 6}, 52);
    const SnrReport a = relative_snr(x, scaled, edges);
    for (float& vv : scaled.data()) vv *= 4.0f;  // power of two: exact in f32
    const SnrReport b = relative_snr(x, scaled, edges);
    double drift = 0.0;
    for (std::size_t i = 0; i < a.ratios.size(); ++i) drift = std::max(drift, std::abs(a.ratios[i] - b.ratios[i]));
    add(check("analysis.snr_scale_invariant", drift <= 1e-12, "max ratio drift " + num(drift)));

    const std::size_t T = 6;
    SeededRng rng(53);
    std::vector<Matrix> maps;
    for (int m = 0; m < 3; ++m) {
      const Matrix q = random_matrix(T * 2, 3, rng), k = random_matrix(T * 2, 3, rng);
      maps.push_back(attention_weights(q, k, frame_indices(T, 2), window_admission(AttentionWindow::local(3), T)));
    }
    const AttnMap agg = aggregate_attention(maps, T);
    double rowdev = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < T; ++j) s += agg(i, j);
      rowdev = std::max(rowdev, std::abs(s - 1.0));
    }
    add(check("analysis.aggregate_row_stochastic", rowdev <= 1e-6, "max |row sum - 1| " + num(rowdev)));
  }

  // harness
  {
    PlanConfig plan;
    plan.t_alpha = 4;
    const TokenSequence tok = random_tokens(16, 2, 2, 4, 61);
    const auto c1 = checksum(run_stack(tok, plan, 3, 7).features.data());
    const auto c2 = checksum(run_stack(tok, plan, 3, 7).features.data());
    add(check("harness.stack_deterministic", c1 == c2, "checksum " + std::to_string(c1)));

    SyntheticScene scene;
    scene.shape = {1, 16, 8, 8};
    scene.tones = {{ToneAxis::frames, 2.0 * std::numbers::pi * 3 / 16, 1.0}, {ToneAxis::width, std::numbers::pi / 2, 0.5}};
    const SpectralTensor X = fft3(make_scene(scene));
    // Expected peaks: (t = +-3, h = 0, w = 0) and (t = 0, h = 0, w = +-2).
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < X.size(); ++i)
      if (std::abs(X.data()[i]) > 1e-3) peaks.push_back(i);
    const std::vector<std::size_t> expected{X.index(0, 0, 0, 2), X.index(0, 0, 0, 6), X.index(0, 3, 0, 0),
                                            X.index(0, 13, 0, 0)};
    add(check("harness.tone_placement", peaks == expected, std::to_string(peaks.size()) + " peak bins"));
  }

  return results;
}

}  // namespace spfu
