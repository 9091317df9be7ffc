// spfu: command-line front end for the spectral fusion toolkit.
//
// Exit status: 0 on success, 1 on runtime errors, 2 on usage errors. Errors
// are reported on stderr as a single line starting with "error:".

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spfu/spfu.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw spfu::Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw spfu::Error("write failed: " + path);
}

struct SceneArgs {
  std::string spec;
  std::string out;
};

struct BlendArgs {
  std::string global;
  std::string local;
  double d0 = spfu::kDefaultLowpassD0;
  std::string domain_mode = "radial";
  std::string out;
};

struct FuseArgs {
  std::string in;
  std::string plan;
  std::uint64_t seed = 0;
  std::size_t depth = 1;
  bool identity = false;
  std::string out;
};

struct SpecMixArgs {
  std::size_t frames = 0;
  std::size_t t_alpha = 0;
  std::uint64_t seed = 0;
  std::size_t channels = 4;
  std::size_t height = 8;
  std::size_t width = 8;
  std::string domain = "spatial";
  std::string out;
};

struct AnalyzeArgs {
  std::string ref;
  std::string ext;
  std::size_t bands = spfu::kDefaultBandCount;
  std::vector<double> edges;
  double threshold = spfu::kAvailabilityThreshold;
  std::string domain_mode = "temporal";
  std::string out;
};

struct AttnMapArgs {
  std::vector<std::string> inputs;
  std::size_t span = 0;
  std::optional<double> keyframe_fraction;
  std::uint64_t seed = 0;
  std::string out;
};

int run_scene(const SceneArgs& a) {
  const auto scene = spfu::SyntheticScene::from_config(spfu::KeyValueConfig::load(a.spec));
  const auto latent = spfu::make_scene(scene);
  spfu::write_tensor(a.out, latent);
  std::cout << "scene " << spfu::to_string(latent.shape()) << " -> " << a.out << "\n";
  return 0;
}

int run_blend(const BlendArgs& a) {
  const auto zg = spfu::read_tensor(a.global);
  const auto zl = spfu::read_tensor(a.local);
  if (zg.shape() != zl.shape()) throw spfu::ShapeMismatch("global and local latents differ in shape");
  const auto lpf = spfu::gaussian_lowpass(spfu::grid_of(zg.shape()), a.d0, spfu::parse_domain_mode(a.domain_mode));
  spfu::write_tensor(a.out, spfu::spectral_blend(zg, zl, lpf));
  std::cout << "blend " << spfu::to_string(zg.shape()) << " d0=" << a.d0 << " -> " << a.out << "\n";
  return 0;
}

int run_fuse(const FuseArgs& a) {
  const auto plan = spfu::PlanConfig::from_config(spfu::KeyValueConfig::load(a.plan));
  const auto tokens = spfu::tokens_from_latent(spfu::read_tensor(a.in));
  const auto kind = a.identity ? spfu::ProjectionKind::identity : spfu::ProjectionKind::gaussian;
  const auto out = spfu::run_stack(tokens, plan, a.depth, a.seed, kind);
  const auto latent = spfu::latent_from_tokens(out);
  spfu::write_tensor(a.out, latent);
  std::cout << "fuse method=" << spfu::to_string(plan.resolved_method()) << " depth=" << a.depth
            << " checksum=" << std::hex << spfu::checksum(latent.data()) << std::dec << " -> " << a.out << "\n";
  return 0;
}

int run_specmix(const SpecMixArgs& a) {
  auto params = spfu::SpecMixParams::from_seed(a.frames, a.t_alpha, a.seed);
  params.domain = spfu::parse_specmix_domain(a.domain);
  const auto x0 = spfu::specmix(params, {a.channels, a.height, a.width});
  spfu::write_tensor(a.out, x0);
  std::cout << "specmix " << spfu::to_string(x0.shape()) << " -> " << a.out << "\n";
  return 0;
}

int run_analyze(const AnalyzeArgs& a) {
  const auto ref = spfu::read_tensor(a.ref);
  const auto ext = spfu::read_tensor(a.ext);
  const auto edges = a.edges.empty() ? spfu::uniform_band_edges(a.bands) : a.edges;
  const auto report = spfu::relative_snr(ref, ext, edges, a.threshold, spfu::parse_domain_mode(a.domain_mode));
  if (!a.out.empty()) write_text(a.out, spfu::to_csv(report));
  std::cout << spfu::to_text(report);
  return 0;
}

int run_attnmap(const AttnMapArgs& a) {
  std::vector<spfu::Matrix> maps;
  std::size_t frames = 0;
  for (const auto& path : a.inputs) {
    const auto tokens = spfu::tokens_from_latent(spfu::read_tensor(path));
    if (frames != 0 && tokens.frames != frames) throw spfu::ShapeMismatch("all inputs must share T");
    frames = tokens.frames;
    const auto qkv = spfu::project_qkv(tokens, spfu::random_qkv(tokens.d_model(), a.seed));
    spfu::FrameAdmission adm;
    if (a.keyframe_fraction)
      adm = spfu::keyframe_admission(spfu::uniform_keyframes(frames, *a.keyframe_fraction), frames);
    else
      adm = spfu::window_admission(a.span == 0 ? spfu::AttentionWindow::global() : spfu::AttentionWindow::local(a.span),
                                   frames);
    maps.push_back(spfu::attention_weights(qkv.q, qkv.k, tokens.frame_index, adm));
  }
  const auto map = spfu::aggregate_attention(maps, frames);
  if (!a.out.empty()) write_text(a.out, spfu::to_csv(map));
  std::cout << "attnmap T=" << frames << " maps=" << maps.size()
            << " diagonality=" << spfu::detail::format_number(spfu::diagonality(map)) << "\n";
  return 0;
}

int run_selftest() {
  std::size_t failed = 0;
  const auto results = spfu::run_selftest();
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
    if (!r.passed) ++failed;
  }
  std::cout << (results.size() - failed) << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral fusion toolkit for long-video attention and noise initialization"};
  app.require_subcommand(1, 1);

  SceneArgs scene;
  auto* scene_cmd = app.add_subcommand("scene", "Synthesize a latent from a scene config");
  scene_cmd->add_option("--spec", scene.spec, "Scene config file")->required();
  scene_cmd->add_option("--out", scene.out, "Output tensor")->required();

  BlendArgs blend;
  auto* blend_cmd = app.add_subcommand("blend", "Two-branch spectral blend of precomputed branch latents");
  blend_cmd->add_option("--global", blend.global, "Global-branch latent")->required();
  blend_cmd->add_option("--local", blend.local, "Local-branch latent")->required();
  blend_cmd->add_option("--d0", blend.d0, "Gaussian low-pass stop frequency")->capture_default_str();
  blend_cmd->add_option("--domain-mode", blend.domain_mode, "radial | temporal")->capture_default_str();
  blend_cmd->add_option("--out", blend.out, "Output tensor")->required();

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Run fusion attention blocks on a token latent");
  fuse_cmd->add_option("--in", fuse.in, "Input latent (C = d_model)")->required();
  fuse_cmd->add_option("--plan", fuse.plan, "Fusion plan config")->required();
  fuse_cmd->add_option("--seed", fuse.seed, "Projection seed")->capture_default_str();
  fuse_cmd->add_option("--depth", fuse.depth, "Number of stacked fusion blocks")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fuse_cmd->add_flag("--identity-projections", fuse.identity, "Use identity Q/K/V projections");
  fuse_cmd->add_option("--out", fuse.out, "Output tensor")->required();

  SpecMixArgs mix;
  auto* mix_cmd = app.add_subcommand("specmix", "Generate SpecMix initial noise");
  mix_cmd->add_option("--frames", mix.frames, "Total frames T")->required();
  mix_cmd->add_option("--t-alpha", mix.t_alpha, "Native window length")->required();
  mix_cmd->add_option("--seed", mix.seed, "Seed")->required();
  mix_cmd->add_option("--channels", mix.channels, "Latent channels")->capture_default_str();
  mix_cmd->add_option("--height", mix.height, "Latent height")->capture_default_str();
  mix_cmd->add_option("--width", mix.width, "Latent width")->capture_default_str();
  mix_cmd->add_option("--domain", mix.domain, "spatial | spatiotemporal")->capture_default_str();
  mix_cmd->add_option("--out", mix.out, "Output tensor")->required();

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Band-wise relative SNR report");
  analyze_cmd->add_option("--ref", analyze.ref, "Reference (short) latent")->required();
  analyze_cmd->add_option("--ext", analyze.ext, "Extended latent")->required();
  auto* bands_opt = analyze_cmd->add_option("--bands", analyze.bands, "Uniform band count")->capture_default_str();
  analyze_cmd->add_option("--edges", analyze.edges, "Explicit band cut points in units of pi")
      ->delimiter(',')
      ->excludes(bands_opt);
  analyze_cmd->add_option("--threshold", analyze.threshold, "Availability threshold")->capture_default_str();
  analyze_cmd->add_option("--domain-mode", analyze.domain_mode, "temporal | radial")->capture_default_str();
  analyze_cmd->add_option("--out", analyze.out, "CSV report path");

  AttnMapArgs attn;
  auto* attn_cmd = app.add_subcommand("attnmap", "Aggregate frame-level attention maps and score diagonality");
  attn_cmd->add_option("--in", attn.inputs, "Input latent(s); one attention map per file")->required();
  auto* span_opt = attn_cmd->add_option("--span", attn.span, "Window span in frames (0 = global)")->capture_default_str();
  attn_cmd->add_option("--keyframes", attn.keyframe_fraction, "Sparse attention with this key-frame fraction")
      ->excludes(span_opt);
  attn_cmd->add_option("--seed", attn.seed, "Projection seed")->capture_default_str();
  attn_cmd->add_option("--out", attn.out, "CSV map path");

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*scene_cmd) return run_scene(scene);
    if (*blend_cmd) return run_blend(blend);
    if (*fuse_cmd) return run_fuse(fuse);
    if (*mix_cmd) return run_specmix(mix);
    if (*analyze_cmd) return run_analyze(analyze);
    if (*attn_cmd) return run_attnmap(attn);
    if (*selftest_cmd) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
