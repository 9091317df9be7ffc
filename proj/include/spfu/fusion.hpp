#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spfu/attention.hpp"
#include "spfu/config.hpp"
#include "spfu/fft.hpp"
#include "spfu/masks.hpp"
#include "spfu/tensor.hpp"

namespace spfu {

inline constexpr double kDefaultLowpassD0 = 0.25;
inline constexpr double kPartitionTolerance = 1e-6;
inline constexpr double kSparseKeyFraction = 0.5;

/// Z' = ifft3(fft3(Z_global) * P + fft3(Z_local) * (1 - P)).
inline VideoLatent spectral_blend(const VideoLatent& z_global, const VideoLatent& z_local, const FrequencyMask& lpf) {
  if (z_global.shape() != z_local.shape()) throw ShapeMismatch("spectral_blend: branch shapes differ");
  if (grid_of(z_global.shape()) != lpf.grid()) throw ShapeMismatch("spectral_blend: filter grid does not match");
  if (!lpf.conjugate_symmetric())
    throw InvalidParameter("spectral_blend: filter must be symmetric under frequency negation");
  SpectralTensor low = apply_mask(fft3(z_global), lpf);
  const SpectralTensor high = apply_mask(fft3(z_local), lpf.complement());
  auto acc = low.data();
  const auto add = high.data();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
  return ifft3(low);
}

inline void require_partition(const std::vector<FrequencyMask>& masks) {
  if (masks.empty()) throw InvalidPlan("no frequency masks given");
  for (const auto& m : masks) {
    if (m.grid() != masks.front().grid()) throw InvalidPlan("masks live on different grids");
    if (!m.conjugate_symmetric()) throw InvalidPlan("mask is not symmetric under frequency negation");
  }
  if (const double err = partition_error(masks); err > kPartitionTolerance)
    throw InvalidPlan("masks do not form a partition of unity (max deviation " + std::to_string(err) + ")");
}

/// Sum_l P_l * fft3(Z_l), accumulated in branch order.
inline SpectralTensor multiband_fuse_spectrum(const std::vector<VideoLatent>& branch_outputs,
                                              const std::vector<FrequencyMask>& masks) {
  if (branch_outputs.size() != masks.size()) throw InvalidPlan("branch and mask counts differ");
  require_partition(masks);
  const Shape shape = branch_outputs.front().shape();
  if (grid_of(shape) != masks.front().grid()) throw ShapeMismatch("masks do not match branch grid");
  SpectralTensor fused(shape);
  auto acc = fused.data();
  for (std::size_t l = 0; l < branch_outputs.size(); ++l) {
    if (branch_outputs[l].shape() != shape) throw ShapeMismatch("branch outputs differ in shape");
    const SpectralTensor band = apply_mask(fft3(branch_outputs[l]), masks[l]);
    const auto src = band.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }
  return fused;
}

inline VideoLatent multiband_fuse(const std::vector<VideoLatent>& branch_outputs,
                                  const std::vector<FrequencyMask>& masks) {
  return ifft3(multiband_fuse_spectrum(branch_outputs, masks));
}

/// One attention branch of a fusion plan.
struct BranchConfig {
  unsigned alpha = 1;
  bool sparse = false;  // keys limited to uniformly sampled key frames
  FrequencyMask mask;
};

enum class FusionMethod { automatic, freelong, freelong_pp };

inline std::string_view to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::freelong: return "freelong";
    case FusionMethod::freelong_pp: return "freelong_pp";
    default: return "auto";
  }
}

/// Branches materialized for one (T, H, W) grid, sorted by ascending alpha.
struct FusionPlan {
  std::size_t t_alpha = 8;
  std::vector<BranchConfig> branches;
  DomainMode domain_mode = DomainMode::temporal;

  std::vector<FrequencyMask> masks() const {
    std::vector<FrequencyMask> out;
    for (const auto& b : branches) out.push_back(b.mask);
    return out;
  }
};

inline void validate(const FusionPlan& plan, std::size_t frames) {
  if (plan.t_alpha == 0) throw InvalidPlan("t_alpha must be >= 1");
  if (plan.branches.empty()) throw InvalidPlan("plan has no branches");
  for (std::size_t l = 0; l < plan.branches.size(); ++l) {
    const auto& b = plan.branches[l];
    if (b.alpha == 0) throw InvalidPlan("branch alpha must be >= 1");
    if (l > 0 && b.alpha <= plan.branches[l - 1].alpha) throw InvalidPlan("branch alphas must be strictly ascending");
    if (b.sparse && l + 1 != plan.branches.size()) throw InvalidPlan("only the largest-alpha branch may be sparse");
  }
  if (plan.branches.back().alpha * plan.t_alpha < frames)
    throw InvalidPlan("largest branch window " + std::to_string(plan.branches.back().alpha * plan.t_alpha) +
                      " frames is shorter than the sequence (" + std::to_string(frames) + ")");
  require_partition(plan.masks());
}

/// Two-branch plan: a local branch (span T_alpha) keeping 1 - P and a global
/// branch keeping the Gaussian low-pass P.
inline FusionPlan make_freelong_plan(std::size_t t_alpha, GridShape grid, double d0 = kDefaultLowpassD0,
                                     DomainMode mode = DomainMode::radial) {
  if (t_alpha == 0) throw InvalidPlan("t_alpha must be >= 1");
  const FrequencyMask lpf = gaussian_lowpass(grid, d0, mode);
  const auto global_alpha =
      static_cast<unsigned>(std::max<std::size_t>(2, (grid.frames + t_alpha - 1) / t_alpha));
  FusionPlan plan;
  plan.t_alpha = t_alpha;
  plan.domain_mode = mode;
  plan.branches.push_back({1, false, lpf.complement()});
  plan.branches.push_back({global_alpha, false, lpf});
  return plan;
}

/// L-branch plan with Nyquist band-pass masks.
inline FusionPlan make_multiband_plan(std::size_t t_alpha, const std::vector<unsigned>& alphas, GridShape grid,
                                      bool sparse_global = false, DomainMode mode = DomainMode::temporal) {
  auto masks = band_masks(alphas, grid, mode);
  FusionPlan plan;
  plan.t_alpha = t_alpha;
  plan.domain_mode = mode;
  for (std::size_t l = 0; l < alphas.size(); ++l)
    plan.branches.push_back({alphas[l], sparse_global && l + 1 == alphas.size(), std::move(masks[l])});
  return plan;
}

/// Per-call details, for inspection and testing.
struct FusionTrace {
  std::vector<VideoLatent> branch_outputs;
  std::vector<AttentionStats> branch_stats;
  std::vector<std::size_t> keyframes;
  SpectralTensor fused_spectrum;
};

namespace detail {

inline Matrix run_branch(const Qkv& qkv, const TokenSequence& tokens, const FusionPlan& plan, const BranchConfig& b,
                         AttentionStats& stats, std::vector<std::size_t>& keyframes_out) {
  if (b.sparse) {
    keyframes_out = uniform_keyframes(tokens.frames, kSparseKeyFraction);
    return sparse_attention(qkv.q, qkv.k, qkv.v, tokens.frame_index, keyframes_out, &stats);
  }
  return masked_attention(qkv.q, qkv.k, qkv.v, tokens.frame_index, AttentionWindow::local(b.alpha * plan.t_alpha),
                          &stats);
}

inline void check_plan_grid(const FusionPlan& plan, const TokenSequence& tokens) {
  validate(tokens);
  validate(plan, tokens.frames);
  if (plan.branches.front().mask.grid() != GridShape{tokens.frames, tokens.height, tokens.width})
    throw ShapeMismatch("plan masks were built for a different (T, H, W) grid");
}

}  // namespace detail

/// Multi-band fusion: every branch attends with window alpha_l * T_alpha on
/// shared Q, K, V (sparse key frames for a flagged largest branch); outputs
/// are fused as sum_l P_l * fft3(Z_l) and transformed back.
inline TokenSequence freelong_pp_attention(const TokenSequence& tokens, const QkvWeights& weights,
                                           const FusionPlan& plan, FusionTrace* trace = nullptr) {
  detail::check_plan_grid(plan, tokens);
  const Qkv qkv = project_qkv(tokens, weights);
  std::vector<VideoLatent> outputs;
  std::vector<AttentionStats> stats(plan.branches.size());
  std::vector<std::size_t> keyframes;
  for (std::size_t l = 0; l < plan.branches.size(); ++l) {
    const Matrix z = detail::run_branch(qkv, tokens, plan, plan.branches[l], stats[l], keyframes);
    outputs.push_back(latent_from_features(z, tokens.frames, tokens.height, tokens.width));
  }
  SpectralTensor fused = multiband_fuse_spectrum(outputs, plan.masks());
  TokenSequence result = tokens_from_latent(ifft3(fused));
  if (trace != nullptr) {
    trace->branch_outputs = std::move(outputs);
    trace->branch_stats = std::move(stats);
    trace->keyframes = std::move(keyframes);
    trace->fused_spectrum = std::move(fused);
  }
  return result;
}

/// Two-branch blend: local attention (span T_alpha) for high frequencies,
/// global attention for the low-pass band.
inline TokenSequence freelong_attention(const TokenSequence& tokens, const QkvWeights& weights,
                                        const FusionPlan& plan, FusionTrace* trace = nullptr) {
  if (plan.branches.size() != 2) throw InvalidPlan("freelong_attention needs exactly two branches");
  detail::check_plan_grid(plan, tokens);
  const Qkv qkv = project_qkv(tokens, weights);
  AttentionStats local_stats;
  AttentionStats global_stats;
  const Matrix local = masked_attention(qkv.q, qkv.k, qkv.v, tokens.frame_index,
                                        AttentionWindow::local(plan.branches[0].alpha * plan.t_alpha), &local_stats);
  const Matrix global = global_attention(qkv.q, qkv.k, qkv.v, tokens.frame_index, &global_stats);
  VideoLatent z_local = latent_from_features(local, tokens.frames, tokens.height, tokens.width);
  VideoLatent z_global = latent_from_features(global, tokens.frames, tokens.height, tokens.width);
  const VideoLatent fused = spectral_blend(z_global, z_local, plan.branches[1].mask);
  if (trace != nullptr) {
    trace->branch_outputs = {std::move(z_local), std::move(z_global)};
    trace->branch_stats = {local_stats, global_stats};
    trace->keyframes.clear();
    trace->fused_spectrum = fft3(fused);
  }
  return tokens_from_latent(fused);
}

/// Shape-free plan description, read from "key = value" text:
///
///   t_alpha       = 8
///   alphas        = 1,2,4
///   sparse_global = false
///   domain_mode   = temporal      # or radial; default depends on method
///   d0            = 0.25
///   method        = auto          # auto | freelong | freelong_pp
///
/// method = auto picks the two-branch blend when two alphas are given and the
/// multi-band fusion otherwise.
struct PlanConfig {
  std::size_t t_alpha = 8;
  std::vector<unsigned> alphas{1, 2, 4};
  bool sparse_global = false;
  std::optional<DomainMode> domain_mode;
  double d0 = kDefaultLowpassD0;
  FusionMethod method = FusionMethod::automatic;

  FusionMethod resolved_method() const {
    if (method != FusionMethod::automatic) return method;
    return alphas.size() == 2 ? FusionMethod::freelong : FusionMethod::freelong_pp;
  }

  DomainMode resolved_domain_mode() const {
    if (domain_mode) return *domain_mode;
    return resolved_method() == FusionMethod::freelong ? DomainMode::radial : DomainMode::temporal;
  }

  FusionPlan materialize(GridShape grid) const {
    if (resolved_method() == FusionMethod::freelong)
      return make_freelong_plan(t_alpha, grid, d0, resolved_domain_mode());
    return make_multiband_plan(t_alpha, alphas, grid, sparse_global, resolved_domain_mode());
  }

  static PlanConfig from_config(const KeyValueConfig& cfg) {
    static const std::vector<std::string> known{"t_alpha", "alphas", "sparse_global", "domain_mode", "d0", "method"};
    for (const auto& [k, v] : cfg.entries())
      if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown plan key '" + k + "'");
    PlanConfig p;
    if (cfg.has("t_alpha")) p.t_alpha = parse_number<std::size_t>(cfg.get("t_alpha"), "t_alpha");
    if (cfg.has("alphas")) p.alphas = parse_list<unsigned>(cfg.get("alphas"), "alphas");
    if (cfg.has("sparse_global")) p.sparse_global = parse_bool(cfg.get("sparse_global"), "sparse_global");
    if (cfg.has("domain_mode")) p.domain_mode = parse_domain_mode(cfg.get("domain_mode"));
    if (cfg.has("d0")) p.d0 = parse_number<double>(cfg.get("d0"), "d0");
    if (cfg.has("method")) {
      const auto& m = cfg.get("method");
      if (m == "auto") p.method = FusionMethod::automatic;
      else if (m == "freelong") p.method = FusionMethod::freelong;
      else if (m == "freelong_pp") p.method = FusionMethod::freelong_pp;
      else throw ConfigError("unknown method '" + m + "'");
    }
    if (p.t_alpha == 0) throw ConfigError("t_alpha must be >= 1");
    require_ascending_alphas(p.alphas);
    if (!(p.d0 > 0.0 && p.d0 <= 1.0)) throw ConfigError("d0 must lie in (0, 1]");
    if (p.resolved_method() == FusionMethod::freelong && p.alphas.size() != 2)
      throw ConfigError("method freelong needs exactly two alphas");
    return p;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "t_alpha = " << t_alpha << "\nalphas = ";
    for (std::size_t i = 0; i < alphas.size(); ++i) os << (i ? "," : "") << alphas[i];
    os << "\nsparse_global = " << (sparse_global ? "true" : "false")
       << "\ndomain_mode = " << to_string(resolved_domain_mode()) << "\nd0 = " << d0
       << "\nmethod = " << to_string(method) << "\n";
    return os.str();
  }
};

/// Runs whichever fusion the config resolves to.
inline TokenSequence fuse_attention(const TokenSequence& tokens, const QkvWeights& weights, const PlanConfig& config,
                                    FusionTrace* trace = nullptr) {
  const FusionPlan plan = config.materialize({tokens.frames, tokens.height, tokens.width});
  if (config.resolved_method() == FusionMethod::freelong) return freelong_attention(tokens, weights, plan, trace);
  return freelong_pp_attention(tokens, weights, plan, trace);
}

}  // namespace spfu
