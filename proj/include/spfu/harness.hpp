#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "spfu/attention.hpp"
#include "spfu/config.hpp"
#include "spfu/fusion.hpp"
#include "spfu/rng.hpp"
#include "spfu/tensor.hpp"

namespace spfu {

enum class ToneAxis { frames, height, width };

struct Tone {
  ToneAxis axis = ToneAxis::frames;
  double omega = 0.0;  // radians per sample, in [0, pi]
  double amplitude = 1.0;
};

/// Synthetic latent with analytically known spectral content.
struct SyntheticScene {
  std::vector<Tone> tones;
  double noise_level = 0.0;
  Shape shape{};
  std::uint64_t seed = 0;

  /// Reads "key = value" text:
  ///
  ///   shape = 8,32,8,8          # C,T,H,W
  ///   tone  = t, 0.125pi, 1.0   # axis (t|h|w), frequency, amplitude; repeatable
  ///   noise_level = 0.1
  ///   seed = 7
  ///
  /// Frequencies are radians, or multiples of pi with a "pi" suffix.
  static SyntheticScene from_config(const KeyValueConfig& cfg) {
    for (const auto& [k, v] : cfg.entries())
      if (k != "shape" && k != "tone" && k != "noise_level" && k != "seed")
        throw ConfigError("unknown scene key '" + k + "'");
    SyntheticScene s;
    const auto dims = parse_list<std::size_t>(cfg.get("shape"), "shape");
    if (dims.size() != 4) throw ConfigError("shape needs four comma-separated axes C,T,H,W");
    s.shape = {dims[0], dims[1], dims[2], dims[3]};
    for (const auto& line : cfg.get_all("tone")) {
      const auto parts = split(line, ',');
      if (parts.size() != 3) throw ConfigError("tone needs 'axis, frequency, amplitude'");
      Tone tone;
      if (parts[0] == "t") tone.axis = ToneAxis::frames;
      else if (parts[0] == "h") tone.axis = ToneAxis::height;
      else if (parts[0] == "w") tone.axis = ToneAxis::width;
      else throw ConfigError("tone axis must be t, h or w");
      std::string_view freq = parts[1];
      double scale = 1.0;
      if (freq.ends_with("pi")) {
        freq.remove_suffix(2);
        scale = std::numbers::pi;
      }
      tone.omega = parse_number<double>(freq, "tone frequency") * scale;
      tone.amplitude = parse_number<double>(parts[2], "tone amplitude");
      s.tones.push_back(tone);
    }
    if (cfg.has("noise_level")) s.noise_level = parse_number<double>(cfg.get("noise_level"), "noise_level");
    if (cfg.has("seed")) s.seed = parse_number<std::uint64_t>(cfg.get("seed"), "seed");
    return s;
  }
};

inline void validate(const SyntheticScene& s) {
  require_valid(s.shape);
  for (const auto& t : s.tones) {
    if (!(t.omega >= 0.0 && t.omega <= std::numbers::pi + 1e-12))
      throw InvalidParameter("tone frequency must lie in [0, pi]");
    if (!(t.amplitude > 0.0)) throw InvalidParameter("tone amplitude must be positive");
  }
  if (!(s.noise_level >= 0.0)) throw InvalidParameter("noise_level must be >= 0");
}

/// Sum of amplitude * cos(omega * coordinate) tones plus seeded Gaussian noise.
inline VideoLatent make_scene(const SyntheticScene& scene) {
  validate(scene);
  const Shape& s = scene.shape;
  VideoLatent out(s);
  SeededRng rng(scene.seed);
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t h = 0; h < s.height; ++h)
        for (std::size_t w = 0; w < s.width; ++w) {
          double v = 0.0;
          for (const auto& tone : scene.tones) {
            const std::size_t coord = tone.axis == ToneAxis::frames ? t : tone.axis == ToneAxis::height ? h : w;
            v += tone.amplitude * std::cos(tone.omega * static_cast<double>(coord));
          }
          if (scene.noise_level > 0.0) v += scene.noise_level * rng.normal();
          out(c, t, h, w) = static_cast<float>(v);
        }
  return out;
}

/// Bin nearest to angular frequency omega on an axis of n samples.
inline std::size_t tone_bin(double omega, std::size_t n) {
  return static_cast<std::size_t>(std::llround(omega * static_cast<double>(n) / (2.0 * std::numbers::pi))) % n;
}

/// Gaussian d x d weights with std 1/sqrt(d), keeping logits O(1).
inline Matrix random_projection(std::size_t d, SeededRng& rng) {
  Matrix m(d, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = static_cast<float>(scale * rng.normal());
  return m;
}

inline QkvWeights random_qkv(std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  QkvWeights w;
  w.query = random_projection(d, rng);
  w.key = random_projection(d, rng);
  w.value = random_projection(d, rng);
  return w;
}

enum class ProjectionKind { gaussian, identity };

/// Seed of block b's projections within a stack seeded by `seed`.
constexpr std::uint64_t block_seed(std::uint64_t seed, std::size_t block) { return mix_seed(seed, 1000 + block); }

/// Applies `depth` fusion blocks in sequence, each with its own projections.
inline TokenSequence run_stack(const TokenSequence& tokens, const PlanConfig& plan, std::size_t depth,
                               std::uint64_t seed, ProjectionKind projections = ProjectionKind::gaussian) {
  if (depth == 0) throw InvalidParameter("run_stack: depth must be >= 1");
  TokenSequence x = tokens;
  for (std::size_t b = 0; b < depth; ++b) {
    const QkvWeights w = projections == ProjectionKind::identity ? QkvWeights::identity(x.d_model())
                                                                 : random_qkv(x.d_model(), block_seed(seed, b));
    x = fuse_attention(x, w, plan);
  }
  return x;
}

/// FNV-1a over the float bit patterns; stable fingerprint of a result.
inline std::uint64_t checksum(std::span<const float> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
      h ^= (bits >> (8 * i)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace spfu
