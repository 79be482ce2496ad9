#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aexp/aexp.hpp"
#include "cli_runner.hpp"
#include "test_support.hpp"

using namespace aexp;
using aexp::testing::TempDir;
using aexp::testing::Outcome;
using aexp::testing::slurp;
namespace fs = std::filesystem;

namespace {

Outcome cli(const std::vector<std::string>& args, const fs::path& scratch) {
  return aexp::testing::run_cli(AEXP_CLI_PATH, args, scratch);
}

std::string line_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with(key + " ")) return line.substr(key.size() + 1);
  }
  return {};
}

/// Every row parses and has the header's column count.
void expect_rectangular_csv(const fs::path& p) {
  const auto rows = csv::parse(slurp(p));
  ASSERT_FALSE(rows.empty()) << p;
  for (const auto& r : rows) ASSERT_EQ(r.size(), rows[0].size()) << p;
}

class CliTest : public ::testing::Test {
 protected:
  /// Synthetic sweep over a small grid; noise grows with gain.
  fs::path make_sweep(const SweepGrid& grid, double read_noise = 1.5) {
    const Scene scene = aexp::testing::textured_scene(96, 72);
    const SyntheticCameraModel model{100.0, read_noise, 1.0, 5};
    return write_sweep(dir_.path() / "sweep", grid,
                       [&](const ExposureParams& p) { return synthetic_capture(scene, model, p); });
  }
  fs::path write_config(const std::string& text) {
    const fs::path p = dir_.path() / "run.cfg";
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }
  fs::path out(const std::string& name) { return dir_.path() / name; }

  TempDir dir_{"cli"};
};

}  // namespace

TEST_F(CliTest, ConstantImageScoresZero) {
  write_pnm(Image(64, 48, 1, 128), out("flat.pgm"));
  const auto o = cli({"score", out("flat.pgm").string()}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("fused 0.000000\n"), std::string::npos) << o.out;
  EXPECT_EQ(line_value(o.out, "noise_estimable"), "yes");
}

TEST_F(CliTest, AlphaOneBetaZeroIsGradientScore) {
  const Scene scene = aexp::testing::textured_scene(80, 60);
  write_pnm(synthetic_capture(scene, {1.0, 2.0, 1.0, 1}, {1.0, 0.0}), out("tex.pgm"));
  const auto o = cli({"--alpha", "1", "--beta", "0", "score", out("tex.pgm").string()}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(line_value(o.out, "fused"), line_value(o.out, "l_gradient"));
  EXPECT_NE(line_value(o.out, "fused"), "0.000000");
}

TEST_F(CliTest, ScoreCsv) {
  write_pnm(Image(16, 16, 3, 60), out("rgb.ppm"));
  const auto o = cli({"--out", out("res").string(), "score", out("rgb.ppm").string(), "--csv"},
                         dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  expect_rectangular_csv(out("res") / "score.csv");
}

TEST_F(CliTest, InputErrorsExitTwoAndNameThePath) {
  std::ofstream(out("junk.pgm"), std::ios::binary) << "P7 not an image";
  auto o = cli({"score", out("junk.pgm").string()}, dir_.path());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("junk.pgm"), std::string::npos) << o.err;

  o = cli({"score", out("absent.pgm").string()}, dir_.path());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("absent.pgm"), std::string::npos) << o.err;

  EXPECT_EQ(cli({"score"}, dir_.path()).code, 2);
  EXPECT_EQ(cli({"frobnicate"}, dir_.path()).code, 2);
  EXPECT_EQ(cli({"--alpha", "2", "score", out("junk.pgm").string()}, dir_.path()).code, 2);
  EXPECT_EQ(cli({"--config", out("nope.cfg").string(), "score", "x"}, dir_.path()).code, 2);
  EXPECT_EQ(cli({"--config", write_config("metric.alpah = 1\n").string(), "score",
                     out("junk.pgm").string()},
                    dir_.path())
                .code,
            2);
}

TEST_F(CliTest, SweepTiesKeepGridOrder) {
  const SweepGrid grid{SweepGrid::axis(1, 1, 3), SweepGrid::axis(0, 2, 2)};
  const auto manifest = write_sweep(dir_.path() / "flat", grid,
                                    [](const ExposureParams&) { return Image(32, 32, 1, 128); });
  const auto o = cli({"--out", out("res").string(), "sweep", manifest.string()}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, "best exposure_ms=1.000000 gain_db=0.000000 fused=0.000000\n");
  const auto rows = csv::parse(slurp(out("res") / "sweep.csv"));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0][0], "exposure_ms");
  const std::vector<std::pair<std::string, std::string>> order{
      {"1.000000", "0.000000"}, {"1.000000", "2.000000"}, {"2.000000", "0.000000"},
      {"2.000000", "2.000000"}, {"3.000000", "0.000000"}, {"3.000000", "2.000000"}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    EXPECT_EQ(rows[i + 1][0], order[i].first);
    EXPECT_EQ(rows[i + 1][1], order[i].second);
  }
}

TEST_F(CliTest, SweepRanksByFused) {
  const auto manifest = make_sweep({SweepGrid::axis(0.5, 0.5, 4), SweepGrid::axis(0, 6, 3)});
  const auto o = cli({"--out", out("res").string(), "sweep", manifest.string()}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = csv::parse(slurp(out("res") / "sweep.csv"));
  ASSERT_EQ(rows.size(), 13u);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_GE(*parse_double(rows[i - 1][5]), *parse_double(rows[i][5]));
  }
  EXPECT_EQ(o.out, "best exposure_ms=" + rows[1][0] + " gain_db=" + rows[1][1] + " fused=" + rows[1][5] +
                       "\n");
}

TEST_F(CliTest, OutputsAreByteIdenticalAcrossRuns) {
  const auto manifest = make_sweep({SweepGrid::axis(0.5, 0.5, 4), SweepGrid::axis(0, 6, 3)});
  const auto cfg = write_config("camera.kind = surface\ncamera.manifest = sweep/manifest.csv\n");
  for (const char* run : {"a", "b"}) {
    const std::string o = out(run).string();
    ASSERT_EQ(cli({"--out", o, "sweep", manifest.string()}, dir_.path()).code, 0);
    ASSERT_EQ(cli({"--out", o, "surface", manifest.string(), "--terms", "fused,noise"}, dir_.path()).code, 0);
    ASSERT_EQ(cli({"--out", o, "--seed", "3", "noise-eval", (dir_.path() / "sweep").string(),
                       "--sigmas", "2,6", "--trials", "3"},
                      dir_.path())
                  .code,
              0);
    ASSERT_EQ(cli({"--out", o, "--config", cfg.string(), "control"}, dir_.path()).code, 0);
  }
  for (const char* f : {"sweep.csv", "surface_fused_raw.csv", "surface_fused_interp.csv",
                        "surface_noise_raw.csv", "surface_noise_interp.csv", "noise_eval.csv",
                        "trace.csv"}) {
    EXPECT_EQ(slurp(out("a") / f), slurp(out("b") / f)) << f;
    expect_rectangular_csv(out("a") / f);
  }
}

TEST_F(CliTest, SurfaceDumpsKnotsExactly) {
  const SweepGrid grid{SweepGrid::axis(0.5, 0.5, 4), SweepGrid::axis(0, 6, 3)};
  const auto manifest = make_sweep(grid);
  const auto o = cli({"--out", out("res").string(), "surface", manifest.string()}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto raw = csv::parse(slurp(out("res") / "surface_fused_raw.csv"));
  const auto dense = csv::parse(slurp(out("res") / "surface_fused_interp.csv"));
  ASSERT_EQ(raw.size(), 1 + grid.size());
  // 10 subdivisions per raw cell: (3*10+1) x (2*10+1) samples.
  ASSERT_EQ(dense.size(), 1u + 31 * 21);
  std::map<std::pair<std::string, std::string>, std::string> dense_at;
  for (std::size_t i = 1; i < dense.size(); ++i) dense_at[{dense[i][0], dense[i][1]}] = dense[i][2];
  for (std::size_t i = 1; i < raw.size(); ++i) {
    EXPECT_EQ(dense_at.at({raw[i][0], raw[i][1]}), raw[i][2]);
  }
  EXPECT_EQ(o.out.rfind("fused argmax exposure_ms=", 0), 0u) << o.out;
  EXPECT_EQ(cli({"surface", manifest.string(), "--terms", "sharpness"}, dir_.path()).code, 2);
}

TEST_F(CliTest, ControlOnSurfaceLandsNearSweepArgmax) {
  const SweepGrid grid{SweepGrid::axis(4, 3, 22), SweepGrid::axis(0, 1, 13)};
  const Scene scene = aexp::testing::blob_scene(320, 240);
  const auto manifest = write_sweep(dir_.path() / "sweep", grid, [&](const ExposureParams& p) {
    return synthetic_capture(scene, aexp::testing::blob_camera(7), p);
  });
  const auto cfg = write_config("camera.kind = surface\ncamera.manifest = sweep/manifest.csv\n");
  const auto sweep = cli({"--out", out("res").string(), "sweep", manifest.string()}, dir_.path());
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  const auto best = csv::parse(slurp(out("res") / "sweep.csv"))[1];
  const auto o = cli({"--out", out("res").string(), "--config", cfg.string(), "control"}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_LE(std::abs(*parse_double(line_value(o.out, "exposure_ms")) - *parse_double(best[0])),
            grid.exposure_step() + 1e-9)
      << o.out << best[0] << " " << best[1];
  EXPECT_LE(std::abs(*parse_double(line_value(o.out, "gain_db")) - *parse_double(best[1])),
            grid.gain_step() + 1e-9)
      << o.out << best[0] << " " << best[1];
}

TEST_F(CliTest, ControlFromCornerStaysInBounds) {
  write_pnm(aexp::testing::from_fn(96, 72, [](int x, int y) { return (x * 3 + y * 5) % 200 + 20; }),
            out("scene.pgm"));
  const auto cfg = write_config(
      "camera.kind = synthetic\ncamera.scene = scene.pgm\ncamera.scene_scale = 0.004\n"
      "controller.start_exposure_ms = 67\ncontroller.start_gain_db = 24\n");
  const auto o = cli({"--out", out("res").string(), "--config", cfg.string(), "control"}, dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto rows = csv::parse(slurp(out("res") / "trace.csv"));
  ASSERT_GT(rows.size(), 1u);
  const ParamBounds b = ParamBounds::indoor();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (int v = 0; v < 3; ++v) {
      const ExposureParams p{*parse_double(rows[i][2 + 3 * v]), *parse_double(rows[i][3 + 3 * v])};
      EXPECT_TRUE(b.contains(p)) << p.exposure_ms << " " << p.gain_db;
    }
  }
}

TEST_F(CliTest, ControlCameraFailureExitsThree) {
  const SweepGrid grid{SweepGrid::axis(4, 3, 22), SweepGrid::axis(0, 4, 7)};
  const auto manifest = write_sweep(dir_.path() / "sweep", grid,
                                    [](const ExposureParams&) { return Image(32, 32, 1, 90); });
  // Keep only the frame at the start point so replay fails mid-run.
  for (std::size_t ei = 0; ei < 22; ++ei) {
    for (std::size_t gi = 0; gi < 7; ++gi) {
      if (ei != 10 || gi != 3) fs::remove(dir_.path() / "sweep" / ("frame_e" + std::to_string(ei) + "_g" + std::to_string(gi) + ".pgm"));
    }
  }
  const auto cfg = write_config(
      "camera.kind = replay\ncamera.manifest = sweep/manifest.csv\n"
      "controller.start_exposure_ms = 34\ncontroller.start_gain_db = 12\n");
  const auto o = cli({"--out", out("res").string(), "--config", cfg.string(), "control"}, dir_.path());
  EXPECT_EQ(o.code, 3) << o.out << o.err;
  EXPECT_NE(o.err.find("frame_e"), std::string::npos) << o.err;
  // The partial trace is still written.
  expect_rectangular_csv(out("res") / "trace.csv");
}

TEST_F(CliTest, ControlWithoutCameraIsInputError) {
  const auto cfg = write_config("metric.alpha = 0.5\n");
  EXPECT_EQ(cli({"--config", cfg.string(), "control"}, dir_.path()).code, 2);
}

TEST_F(CliTest, NoiseEvalValidation) {
  fs::create_directories(out("empty"));
  EXPECT_EQ(cli({"noise-eval", out("empty").string()}, dir_.path()).code, 2);
  fs::create_directories(out("imgs"));
  write_pnm(Image(32, 32, 1, 128), out("imgs") / "a.pgm");
  EXPECT_EQ(cli({"noise-eval", out("imgs").string(), "--trials", "1"}, dir_.path()).code, 2);
  EXPECT_EQ(cli({"noise-eval", out("imgs").string(), "--sigmas", "-1"}, dir_.path()).code, 2);
  const auto o = cli({"--out", out("res").string(), "noise-eval", out("imgs").string(), "--sigmas", "0,4",
                          "--trials", "2"},
                         dir_.path());
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out, slurp(out("res") / "noise_eval.csv"));
  EXPECT_EQ(csv::parse(o.out).size(), 3u);
}
