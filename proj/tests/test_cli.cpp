#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "spfu/rng.hpp"
#include "spfu/tensor_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
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

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("spfu_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) {
  const auto r = run("");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  const auto r = run("specmix --frames 8 --t-alpha 8 --seed 1 --out " + path("x.spfu") + " --bogus 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.output.rfind("error:", 0), 0u);
}

TEST_F(Cli, MissingInputIsRuntimeError) {
  const auto r = run("blend --global " + path("none.spfu") + " --local " + path("none.spfu") + " --out " + path("z.spfu"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.output.rfind("error:", 0), 0u);
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1);
}

TEST_F(Cli, SpecmixIsByteReproducible) {
  ASSERT_EQ(run("specmix --frames 32 --t-alpha 8 --seed 1 --out " + path("a.spfu")).code, 0);
  ASSERT_EQ(run("specmix --frames 32 --t-alpha 8 --seed 1 --out " + path("b.spfu")).code, 0);
  EXPECT_EQ(slurp(path("a.spfu")), slurp(path("b.spfu")));
  const auto x = spfu::read_tensor(path("a.spfu"));
  EXPECT_EQ(x.shape(), (spfu::Shape{4, 32, 8, 8}));
}

TEST_F(Cli, BlendWritesFusedTensor) {
  spfu::write_tensor(path("g.spfu"), spfu::gaussian_latent({2, 16, 4, 4}, 1));
  spfu::write_tensor(path("l.spfu"), spfu::gaussian_latent({2, 16, 4, 4}, 2));
  const auto r = run("blend --global " + path("g.spfu") + " --local " + path("l.spfu") + " --d0 0.25 --out " + path("z.spfu"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(spfu::read_tensor(path("z.spfu")).shape(), (spfu::Shape{2, 16, 4, 4}));
}

TEST_F(Cli, AnalyzeWritesSixteenRows) {
  spfu::write_tensor(path("short.spfu"), spfu::gaussian_latent({2, 16, 4, 4}, 1));
  spfu::write_tensor(path("long.spfu"), spfu::gaussian_latent({2, 64, 4, 4}, 2));
  const auto r = run("analyze --ref " + path("short.spfu") + " --ext " + path("long.spfu") +
                     " --bands 16 --threshold 0.9 --out " + path("report.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto csv = slurp(path("report.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
  EXPECT_EQ(csv.rfind("band_lo,band_hi,ratio,available\n", 0), 0u);
}

TEST_F(Cli, SceneFuseAttnmapPipeline) {
  std::ofstream(path("scene.cfg")) << "shape = 4,16,2,2\ntone = t, 0.125pi, 1.0\nnoise_level = 0.5\nseed = 3\n";
  std::ofstream(path("plan.cfg")) << "t_alpha = 4\nalphas = 1,2,4\nsparse_global = true\n";
  ASSERT_EQ(run("scene --spec " + path("scene.cfg") + " --out " + path("s.spfu")).code, 0);
  const auto f = run("fuse --in " + path("s.spfu") + " --plan " + path("plan.cfg") + " --seed 5 --depth 2 --out " + path("f.spfu"));
  ASSERT_EQ(f.code, 0) << f.output;
  EXPECT_EQ(spfu::read_tensor(path("f.spfu")).shape(), (spfu::Shape{4, 16, 2, 2}));
  const auto a = run("attnmap --in " + path("s.spfu") + " --in " + path("f.spfu") + " --span 4 --out " + path("m.csv"));
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_NE(a.output.find("diagonality"), std::string::npos);
  const auto csv = slurp(path("m.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
}

TEST_F(Cli, BadPlanIsRuntimeError) {
  spfu::write_tensor(path("s.spfu"), spfu::gaussian_latent({4, 16, 2, 2}, 1));
  std::ofstream(path("plan.cfg")) << "t_alpha = 2\nalphas = 1,2,4\n";  // 4 * 2 < 16 frames
  const auto r = run("fuse --in " + path("s.spfu") + " --plan " + path("plan.cfg") + " --out " + path("f.spfu"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.output.rfind("error:", 0), 0u);
}

TEST_F(Cli, SelftestPasses) {
  const auto r = run("selftest");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}
