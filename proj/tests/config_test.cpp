#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "aexp/aexp.hpp"
#include "test_support.hpp"

using namespace aexp;
using aexp::testing::TempDir;

TEST(FormatNumber, FixedSixDecimals) {
  EXPECT_EQ(format_number(0.0), "0.000000");
  EXPECT_EQ(format_number(-0.0), "0.000000");
  EXPECT_EQ(format_number(1.0), "1.000000");
  EXPECT_EQ(format_number(-2.5), "-2.500000");
  EXPECT_EQ(format_number(1234.56789), "1234.567890");
  EXPECT_EQ(format_number(-1e-9), "0.000000");
  EXPECT_EQ(format_number(NAN), "nan");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
}

TEST(ParseNumbers, StrictFullMatch) {
  EXPECT_EQ(parse_double(" +1.5 "), 1.5);
  EXPECT_EQ(parse_double("1e-3"), 1e-3);
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_EQ(parse_int("42"), 42);
  EXPECT_FALSE(parse_int("4.2"));
}

TEST(Csv, RoundTripsAwkwardFields) {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "", "line\nbreak"};
  const auto rows = csv::parse(csv::row(fields) + csv::row({"a", "b"}));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], fields);
  EXPECT_EQ(rows[1], (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, CrlfAndTrailingEmptyField) {
  const auto rows = csv::parse("a,\"b,c\"\r\nd,\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"d", ""}));
}

TEST(Csv, RejectsMalformedQuoting) {
  EXPECT_THROW(csv::parse("a,\"b\n"), csv::CsvError);
  EXPECT_THROW(csv::parse("a,b\"c\n"), csv::CsvError);
  EXPECT_THROW(csv::parse("\"a\"b\n"), csv::CsvError);
}

TEST(KeyValues, CommentsWhitespaceAndOrder) {
  const auto kv = parse_key_values("# header\n  b = 2  # trailing\n\na=1\n");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"b", "2"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"a", "1"}));
}

TEST(KeyValues, DuplicateKeyNamesBothLines) {
  try {
    parse_key_values("alpha = 1\nbeta = 2\nalpha = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("duplicate key 'alpha'"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("line 1"), std::string::npos);
  }
  EXPECT_THROW(parse_key_values("no equals sign\n"), ConfigError);
}

TEST(MetricConfigText, RoundTrips) {
  MetricConfig cfg;
  cfg.alpha = 0.25;
  cfg.beta = 0.125;
  cfg.n_cells = 64;
  cfg.p = 0.9;
  EXPECT_EQ(to_key_value_text(parse_metric_config(to_key_value_text(cfg))), to_key_value_text(cfg));
  const auto back = parse_metric_config(to_key_value_text(cfg));
  EXPECT_EQ(back.alpha, 0.25);
  EXPECT_EQ(back.n_cells, 64);
}

TEST(MetricConfigText, RejectsUnknownAndInvalid) {
  EXPECT_THROW(parse_metric_config("alpah = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_metric_config("alpha = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_metric_config("n_cells = 50\n"), ConfigError);
  EXPECT_THROW(parse_metric_config("tau_l = 200\ntau_h = 100\n"), ConfigError);
}

TEST(RunConfigText, FullExample) {
  TempDir dir("config");
  write_pnm(Image(8, 8, 1, 100), dir.path() / "scene.pgm");
  const auto cfg = parse_run_config(
      "metric.alpha = 0.5\n"
      "controller.profile = outdoor\n"
      "controller.gain_max_db = 12\n"
      "controller.patience = 3\n"
      "camera.kind = synthetic\n"
      "camera.scene = scene.pgm\n"
      "camera.read_noise_sigma = 2\n"
      "seed = 9\n",
      dir.path());
  EXPECT_EQ(cfg.metric.alpha, 0.5);
  EXPECT_EQ(cfg.controller.stop.patience, 3);
  const auto b = cfg.bounds();
  EXPECT_NEAR(b.max_ms, 7.45, 1e-12);
  EXPECT_EQ(b.max_db, 12);
  EXPECT_NEAR(cfg.start(b).gain_db, 6, 1e-12);
  ASSERT_TRUE(cfg.camera);
  EXPECT_EQ(cfg.camera->scene, dir.path() / "scene.pgm");
  EXPECT_EQ(cfg.camera->model.read_noise_sigma, 2);
  EXPECT_EQ(cfg.seed, 9u);
}

TEST(RunConfigText, RejectsUnknownKeysMissingFilesAndBadValues) {
  TempDir dir("config_bad");
  EXPECT_THROW(parse_run_config("controller.epsilonn = 1\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_run_config("metric.nope = 1\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_run_config("controller.epsilon = fast\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_run_config("controller.epsilon = -1\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_run_config("controller.profile = space\n", dir.path()), ConfigError);
  try {
    parse_run_config("camera.kind = replay\ncamera.manifest = nowhere.csv\n", dir.path());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere.csv"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("camera.kind = surface\n", dir.path()), ConfigError);
  EXPECT_THROW(load_run_config(dir.path() / "absent.cfg"), ConfigError);
}

TEST(MetricConfigText, ExactForTinyValues) {
  MetricConfig cfg;
  cfg.s_floor = 1e-9;
  cfg.lambda = 1.0 / 3.0;
  const auto back = parse_metric_config(to_key_value_text(cfg));
  EXPECT_EQ(back.s_floor, 1e-9);
  EXPECT_EQ(back.lambda, 1.0 / 3.0);
}
