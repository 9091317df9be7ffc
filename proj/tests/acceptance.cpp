// Acceptance checks, one line per criterion. Exit status is nonzero if any fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spfu/spfu.hpp"

namespace fs = std::filesystem;
using namespace spfu;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = static_cast<float>(rng.normal());
  return m;
}

TokenSequence random_tokens(std::size_t T, std::size_t h, std::size_t w, std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  return make_tokens(random_matrix(T * h * w, d, rng), T, h, w);
}

// Spectrum of one branch computed entirely by the oracles.
std::vector<oracle::cplx> oracle_branch_spectrum(const TokenSequence& tok, const QkvWeights& w,
                                                 const std::function<bool(std::size_t, std::size_t)>& admit) {
  const Matrix q = oracle::matmul(tok.features, w.query);
  const Matrix k = oracle::matmul(tok.features, w.key);
  const Matrix v = oracle::matmul(tok.features, w.value);
  const Matrix z = oracle::attention(q, k, v, tok.frame_index, admit);
  return oracle::dft3(latent_from_features(z, tok.frames, tok.height, tok.width));
}

// AC1
Outcome spectral_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Shape> shapes{{1, 1, 1, 1}, {1, 7, 5, 3}, {2, 8, 8, 8}, {3, 16, 9, 12}, {4, 32, 16, 16}};
  double roundtrip = 0.0, parseval = 0.0;
  std::uint64_t seed = 100;
  for (const auto& s : shapes)
    for (int rep = 0; rep < 3; ++rep) {
      const auto x = gaussian_latent(s, seed++);
      const auto X = fft3(x);
      roundtrip = std::max(roundtrip, max_abs_diff(ifft3(X), x));
      parseval = std::max(parseval, std::abs(energy(X) - energy(x)) / energy(x));
    }
  const double secs = seconds_since(t0);
  return {roundtrip <= 1e-4 && parseval <= 1e-5 && secs < 5.0,
          "roundtrip " + num(roundtrip) + " <= 1e-4, parseval " + num(parseval) + " <= 1e-5, " + num(secs) +
              " s < 5 s"};
}

// AC2
Outcome band_partition() {
  const std::vector<std::vector<unsigned>> lists{{1}, {1, 2}, {1, 2, 4}, {1, 2, 4, 8}};
  const GridShape grid{64, 4, 4};
  bool exact = true, owners = true, edges = true;
  for (const auto& alphas : lists) {
    const auto masks = band_masks(alphas, grid);
    std::size_t i = 0;
    for (std::size_t t = 0; t < grid.frames; ++t)
      for (std::size_t h = 0; h < grid.height; ++h)
        for (std::size_t w = 0; w < grid.width; ++w, ++i) {
          double sum = 0.0;
          for (const auto& m : masks) sum += m.weights()[i];
          exact = exact && sum == 1.0;
          // Owner from the edge formula: the coarsest alpha whose limit pi/(2 alpha) still covers f.
          const double f = oracle::freq(t, grid.frames);
          std::size_t owner = 0;
          for (std::size_t l = 0; l < alphas.size(); ++l)
            if (l == 0 || f <= 1.0 / (2.0 * alphas[l])) owner = l;
          owners = owners && masks[owner].weights()[i] == 1.0;
        }
    const auto specs = band_specs(alphas);
    for (std::size_t l = 1; l < specs.size(); ++l) edges = edges && specs[l].hi == 1.0 / (2.0 * alphas[l]);
  }
  const auto s = band_specs({1, 2, 4});
  edges = edges && s[2].lo == 0.0 && s[2].hi == 0.125 && s[1].hi == 0.25 && s[0].lo == 0.25 && s[0].hi == 1.0;
  return {exact && owners && edges, std::string("sum exactly 1: ") + (exact ? "yes" : "no") +
                                        ", owners per pi/(2a): " + (owners ? "yes" : "no") +
                                        ", {1,2,4} edges pi/8, pi/4: " + (edges ? "yes" : "no")};
}

// AC3
Outcome attention_oracle() {
  SeededRng rng(2024);
  double worst = 0.0;
  std::size_t cases = 0, max_tokens = 0;
  while (cases < 120) {
    const std::size_t T = 1 + rng.below(16);
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8);
    const std::size_t d = 1 + rng.below(16);
    if (T * h * w > 1024) continue;
    max_tokens = std::max(max_tokens, T * h * w);
    const auto frames = frame_indices(T, h * w);
    const Matrix q = random_matrix(T * h * w, d, rng), k = random_matrix(T * h * w, d, rng),
                 v = random_matrix(T * h * w, d, rng);
    const std::size_t span = 1 + rng.below(2 * T + 1);
    const Matrix got = masked_attention(q, k, v, frames, AttentionWindow::local(span));
    const Matrix want = oracle::attention(q, k, v, frames, [&](std::size_t i, std::size_t j) {
      return oracle::window_admits(i, j, span, T);
    });
    worst = std::max(worst, max_abs_diff(got, want));

    std::vector<std::size_t> keys;
    for (std::size_t j = 0; j < T; ++j)
      if (rng.below(2) == 0) keys.push_back(j);
    if (keys.empty()) keys.push_back(rng.below(T));
    const Matrix sparse = sparse_attention(q, k, v, frames, keys);
    const Matrix sparse_want = oracle::attention(q, k, v, frames, [&](std::size_t, std::size_t j) {
      return std::find(keys.begin(), keys.end(), j) != keys.end();
    });
    worst = std::max(worst, max_abs_diff(sparse, sparse_want));
    ++cases;
  }
  return {cases >= 100 && worst <= 1e-6, std::to_string(cases) + " cases (masked + sparse, up to " +
                                              std::to_string(max_tokens) + " tokens), max diff " + num(worst) +
                                              " <= 1e-6"};
}

// AC4
Outcome reduction_chain() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::size_t Ta = 8;
    const auto tok = random_tokens(Ta, 3, 3, 8, seed);
    const auto w = random_qkv(8, seed + 50);
    const GridShape grid{Ta, 3, 3};
    const auto pp = freelong_pp_attention(tok, w, make_multiband_plan(Ta, {1, 2}, grid));
    const auto fl = freelong_attention(tok, w, make_freelong_plan(Ta, grid));
    const auto qkv = project_qkv(tok, w);
    const Matrix plain = global_attention(qkv.q, qkv.k, qkv.v, tok.frame_index);
    worst = std::max({worst, max_abs_diff(pp.features, fl.features), max_abs_diff(fl.features, plain),
                      max_abs_diff(pp.features, plain)});
  }
  return {worst <= 1e-4, "T = T_a: max diff across pp(L=2) / two-branch / plain " + num(worst) + " <= 1e-4"};
}

// AC5
Outcome band_ownership() {
  const std::size_t Ta = 8, T = 4 * Ta;
  const std::vector<unsigned> alphas{1, 2, 4};
  const auto tok = random_tokens(T, 4, 4, 8, 77);
  const auto w = random_qkv(8, 78);
  const auto plan = make_multiband_plan(Ta, alphas, {T, 4, 4});
  const auto out = oracle::dft3(latent_from_tokens(freelong_pp_attention(tok, w, plan)));
  std::vector<std::vector<oracle::cplx>> branch;
  for (unsigned a : alphas)
    branch.push_back(oracle_branch_spectrum(tok, w, [&](std::size_t i, std::size_t j) {
      return oracle::window_admits(i, j, a * Ta, T);
    }));
  const std::size_t g = T * 16;
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double f = oracle::freq((i % g) / 16, T);
    std::size_t owner = 0;
    for (std::size_t l = 0; l < alphas.size(); ++l)
      if (l == 0 || f <= 1.0 / (2.0 * alphas[l])) owner = l;
    worst = std::max(worst, std::abs(out[i] - branch[owner][i]));
  }
  return {worst <= 1e-4, "{1,2,4} at T = 32: max per-bin diff to owning branch " + num(worst) + " <= 1e-4"};
}

// AC6
Outcome specmix_limits() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t T = 33, draws = 200;
  const FrameShape fs{4, 8, 8};
  bool exact = true;
  std::vector<double> sumsq(T, 0.0);
  for (std::size_t s = 0; s < draws; ++s) {
    const auto r = specmix_detailed(SpecMixParams::from_seed(T, 8, s), fs);
    for (std::size_t c = 0; c < fs.channels; ++c)
      for (std::size_t h = 0; h < fs.height; ++h)
        for (std::size_t w = 0; w < fs.width; ++w) {
          exact = exact && r.mixed_spectrum(c, T / 2, h, w) == r.base_spectrum(c, T / 2, h, w) &&
                  r.mixed_spectrum(c, 0, h, w) == r.residual_spectrum(c, 0, h, w) &&
                  r.mixed_spectrum(c, T - 1, h, w) == r.residual_spectrum(c, T - 1, h, w);
          for (std::size_t t = 0; t < T; ++t) {
            const double v = r.initial_noise(c, t, h, w);
            sumsq[t] += v * v;
          }
        }
  }
  const double n = static_cast<double>(draws * fs.channels * fs.height * fs.width);
  double worst = 0.0;
  for (double s : sumsq) worst = std::max(worst, std::abs(s / n - 1.0));
  const double secs = seconds_since(t0);
  return {exact && worst <= 0.1 && secs < 60.0, std::string("center/endpoint slices exact: ") + (exact ? "yes" : "no") +
                                                    ", worst slice variance deviation " + num(worst) +
                                                    " <= 0.1 over 200 seeds, " + num(secs) + " s < 60 s"};
}

// AC7
Outcome distortion_trend() {
  const auto ref = gaussian_latent({4, 16, 8, 8}, 501);
  const auto raw = gaussian_latent({4, 128, 8, 8}, 502);
  const auto ext = ifft3(apply_mask(fft3(raw), gaussian_lowpass(grid_of(raw.shape()), kDefaultLowpassD0)));
  const auto r = relative_snr(ref, ext, {0.25});
  const double low = r.ratios[0], high = r.ratios[1];
  return {low >= 0.95 && high <= 0.7 && high < low,
          "8x extension after d0 = 0.25 low-pass: low-band ratio " + num(low) + " >= 0.95, high-band ratio " +
              num(high) + " <= 0.7"};
}

// AC8
Outcome attention_structure() {
  const std::size_t Ta = 8, T = 4 * Ta, per = 4, d = 8;
  std::vector<Matrix> windowed, global;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SeededRng rng(900 + seed);
    const Matrix q = random_matrix(T * per, d, rng), k = random_matrix(T * per, d, rng);
    const auto frames = frame_indices(T, per);
    windowed.push_back(attention_weights(q, k, frames, window_admission(AttentionWindow::local(Ta), T)));
    global.push_back(attention_weights(q, k, frames, window_admission(AttentionWindow::global(), T)));
  }
  const double dw = diagonality(aggregate_attention(windowed, T));
  const double dg = diagonality(aggregate_attention(global, T));
  return {dw >= 2.0 * dg, "T = 32: windowed diagonality " + num(dw) + " >= 2 x global " + num(dg)};
}

// AC9
Outcome sparse_efficiency() {
  const std::size_t Ta = 8, T = 4 * Ta;
  const auto tok = random_tokens(T, 4, 4, 8, 31);
  const auto w = random_qkv(8, 32);
  const GridShape grid{T, 4, 4};
  const auto dense_plan = make_multiband_plan(Ta, {1, 2, 4}, grid, false);
  const auto sparse_plan = make_multiband_plan(Ta, {1, 2, 4}, grid, true);
  FusionTrace dense, sparse;
  freelong_pp_attention(tok, w, dense_plan, &dense);
  freelong_pp_attention(tok, w, sparse_plan, &sparse);

  const auto qkv = project_qkv(tok, w);
  AttentionStats full;
  global_attention(qkv.q, qkv.k, qkv.v, tok.frame_index, &full);
  const double ratio = static_cast<double>(sparse.branch_stats.back().total()) / static_cast<double>(full.total());
  const bool dense_is_global = dense.branch_stats.back().total() == full.total();

  const auto& coarse = sparse_plan.branches.back().mask;
  const std::size_t g = grid.size();
  std::size_t outside_diffs = 0, inside_diffs = 0;
  const auto a = dense.fused_spectrum.data(), b = sparse.fused_spectrum.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    if (coarse.weights()[i % g] == 0.0) ++outside_diffs;
    else ++inside_diffs;
  }
  return {ratio <= 0.55 && dense_is_global && outside_diffs == 0,
          "global-branch MACs " + num(100 * ratio) + "% <= 55% of dense, bins changed outside coarsest band " +
              std::to_string(outside_diffs) + " (inside " + std::to_string(inside_diffs) + ")"};
}

// AC10
struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SPFU_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs every subcommand into `dir` and returns the concatenated stdout plus all output files.
std::string cli_session(const fs::path& dir) {
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };
  std::ofstream(p("scene.cfg")) << "shape = 4,32,2,2\ntone = t, 0.125pi, 1.0\ntone = h, 0.5pi, 0.5\nnoise_level = 0.3\nseed = 9\n";
  std::ofstream(p("short.cfg")) << "shape = 4,8,2,2\ntone = t, 0.125pi, 1.0\nnoise_level = 0.3\nseed = 8\n";
  std::ofstream(p("plan.cfg")) << "t_alpha = 8\nalphas = 1,2,4\nsparse_global = true\n";
  const std::vector<std::string> commands{
      "selftest",
      "scene --spec " + p("scene.cfg") + " --out " + p("long.spfu"),
      "scene --spec " + p("short.cfg") + " --out " + p("short.spfu"),
      "specmix --frames 32 --t-alpha 8 --seed 1 --out " + p("x0.spfu"),
      "specmix --frames 32 --t-alpha 8 --seed 1 --channels 4 --height 2 --width 2 --out " + p("x1.spfu"),
      "blend --global " + p("long.spfu") + " --local " + p("x1.spfu") + " --d0 0.25 --out " + p("z.spfu"),
      "fuse --in " + p("long.spfu") + " --plan " + p("plan.cfg") + " --seed 3 --depth 2 --out " + p("f.spfu"),
      "analyze --ref " + p("short.spfu") + " --ext " + p("f.spfu") + " --bands 16 --threshold 0.9 --out " +
          p("report.csv"),
      "attnmap --in " + p("long.spfu") + " --in " + p("f.spfu") + " --span 8 --seed 4 --out " + p("map.csv"),
  };
  std::string transcript;
  for (const auto& c : commands) {
    const auto r = run(c);
    transcript += "$ " + std::to_string(r.code) + "\n" + r.output;
  }
  for (const char* f : {"long.spfu", "short.spfu", "x0.spfu", "x1.spfu", "z.spfu", "f.spfu", "report.csv", "map.csv"})
    transcript += std::string("# ") + f + "\n" + slurp(p(f));
  return transcript;
}

Outcome determinism() {
  // Both sessions use the same directory so that argv is identical.
  const fs::path root = fs::temp_directory_path() / "spfu_acceptance";
  fs::remove_all(root);
  const auto a = cli_session(root);
  fs::remove_all(root);
  const auto b = cli_session(root);
  fs::remove_all(root);
  const bool same = a == b;
  const bool all_ok = a.find("$ 1\n") == std::string::npos && a.find("$ 2\n") == std::string::npos;
  return {same && all_ok, "selftest + 8 CLI invocations, " + std::to_string(a.size()) + " bytes of output, " +
                              (same ? "byte-identical" : "differ") + (all_ok ? ", all exit 0" : ", some failed")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"AC1", "spectral identity", spectral_identity},
      {"AC2", "band partition", band_partition},
      {"AC3", "attention oracle equivalence", attention_oracle},
      {"AC4", "reduction chain", reduction_chain},
      {"AC5", "band ownership", band_ownership},
      {"AC6", "specmix limits and variance", specmix_limits},
      {"AC7", "distortion trend", distortion_trend},
      {"AC8", "attention structure", attention_structure},
      {"AC9", "sparse efficiency", sparse_efficiency},
      {"AC10", "determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
