// Flat key=value run configuration.
//
//   # comment
//   metric.alpha = 0.4
//   controller.epsilon = 1.7
//   camera.kind = surface
//   camera.manifest = sweep/manifest.csv
//
// Keys are section-prefixed; unknown keys and duplicate keys are rejected.
// Relative paths resolve against the config file's directory, and every
// referenced file must exist when the config is loaded.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aexp/camera.hpp"
#include "aexp/controller.hpp"
#include "aexp/metric.hpp"
#include "aexp/text.hpp"

namespace aexp {

/// Ordered key=value pairs with line numbers kept for diagnostics.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (const auto [it, inserted] = seen.emplace(key, line_no); !inserted) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key +
                        "' (first on line " + std::to_string(it->second) + ")");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

/// A MetricConfig file uses the bare field names as keys.
inline MetricConfig parse_metric_config(std::string_view text) {
  MetricConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (!cfg.set(k, v)) throw ConfigError("unknown metric key '" + k + "'");
  }
  cfg.validate();
  return cfg;
}

inline std::string to_key_value_text(const MetricConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.to_key_values()) out += k + " = " + v + "\n";
  return out;
}

enum class CameraKind { Synthetic, Replay, Surface };

struct CameraSettings {
  CameraKind kind = CameraKind::Synthetic;
  std::filesystem::path manifest;  // replay, surface
  std::filesystem::path scene;     // synthetic: PNM whose gray levels give radiance
  double scene_scale = 1.0;
  SyntheticCameraModel model;
  Quantization surface_quantum{0.001, 0.1};
};

struct RunConfig {
  MetricConfig metric;
  ControllerSettings controller;
  std::string profile = "indoor";
  std::optional<double> exposure_min_ms, exposure_max_ms, gain_min_db, gain_max_db;
  std::optional<double> start_exposure_ms, start_gain_db;
  std::optional<CameraSettings> camera;
  int exposure_subdivisions = 10;
  int gain_subdivisions = 10;
  std::uint64_t seed = 0;

  /// Profile ranges with any explicit overrides applied.
  [[nodiscard]] ParamBounds bounds(std::optional<ParamBounds> base = std::nullopt) const {
    ParamBounds b = base ? *base : (profile == "outdoor" ? ParamBounds::outdoor()
                                                         : ParamBounds::indoor());
    if (exposure_min_ms) b.min_ms = *exposure_min_ms;
    if (exposure_max_ms) b.max_ms = *exposure_max_ms;
    if (gain_min_db) b.min_db = *gain_min_db;
    if (gain_max_db) b.max_db = *gain_max_db;
    return b;
  }

  /// Explicit start, else the center of the bounds.
  [[nodiscard]] ExposureParams start(const ParamBounds& b) const {
    return {start_exposure_ms.value_or(0.5 * (b.min_ms + b.max_ms)),
            start_gain_db.value_or(0.5 * (b.min_db + b.max_db))};
  }

  /// Applies one prefixed key. Throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = {}) {
    const auto number = [&]() {
      const auto v = parse_double(value);
      if (!v) throw ConfigError("bad number '" + value + "' for key '" + key + "'");
      return *v;
    };
    const auto integer = [&]() {
      const auto v = parse_int(value);
      if (!v) throw ConfigError("bad integer '" + value + "' for key '" + key + "'");
      return *v;
    };
    const auto existing_path = [&]() {
      std::filesystem::path p(value);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      if (!std::filesystem::exists(p)) {
        throw ConfigError("key '" + key + "' references missing file '" + p.string() + "'");
      }
      return p;
    };
    const auto cam = [&]() -> CameraSettings& {
      if (!camera) camera.emplace();
      return *camera;
    };

    constexpr std::string_view kMetric = "metric.";
    if (key.starts_with(kMetric)) {
      if (!metric.set(std::string_view(key).substr(kMetric.size()), value)) {
        throw ConfigError("unknown key '" + key + "'");
      }
      return;
    }
    auto& c = controller;
    if (key == "controller.epsilon") c.epsilon = number();
    else if (key == "controller.kappa") c.kappa = number();
    else if (key == "controller.reflection") c.nm.reflection = number();
    else if (key == "controller.expansion") c.nm.expansion = number();
    else if (key == "controller.contraction") c.nm.contraction = number();
    else if (key == "controller.shrink") c.nm.shrink = number();
    else if (key == "controller.min_diameter") c.stop.min_diameter = number();
    else if (key == "controller.min_improvement") c.stop.min_improvement = number();
    else if (key == "controller.patience") c.stop.patience = static_cast<int>(integer());
    else if (key == "controller.max_iterations") c.stop.max_iterations = static_cast<int>(integer());
    else if (key == "controller.exposure_quantum_ms") c.quantum.exposure_ms = number();
    else if (key == "controller.gain_quantum_db") c.quantum.gain_db = number();
    else if (key == "controller.profile") {
      if (value != "indoor" && value != "outdoor") {
        throw ConfigError("controller.profile must be indoor or outdoor");
      }
      profile = value;
    }
    else if (key == "controller.exposure_min_ms") exposure_min_ms = number();
    else if (key == "controller.exposure_max_ms") exposure_max_ms = number();
    else if (key == "controller.gain_min_db") gain_min_db = number();
    else if (key == "controller.gain_max_db") gain_max_db = number();
    else if (key == "controller.start_exposure_ms") start_exposure_ms = number();
    else if (key == "controller.start_gain_db") start_gain_db = number();
    else if (key == "camera.kind") {
      if (value == "synthetic") cam().kind = CameraKind::Synthetic;
      else if (value == "replay") cam().kind = CameraKind::Replay;
      else if (value == "surface") cam().kind = CameraKind::Surface;
      else throw ConfigError("camera.kind must be synthetic, replay or surface");
    }
    else if (key == "camera.manifest") cam().manifest = existing_path();
    else if (key == "camera.scene") cam().scene = existing_path();
    else if (key == "camera.scene_scale") cam().scene_scale = number();
    else if (key == "camera.full_well") cam().model.full_well = number();
    else if (key == "camera.read_noise_sigma") cam().model.read_noise_sigma = number();
    else if (key == "camera.noise_gain_exponent") cam().model.noise_gain_exponent = number();
    else if (key == "camera.seed") cam().model.rng_seed = static_cast<std::uint64_t>(integer());
    else if (key == "camera.exposure_quantum_ms") cam().surface_quantum.exposure_ms = number();
    else if (key == "camera.gain_quantum_db") cam().surface_quantum.gain_db = number();
    else if (key == "surface.exposure_subdivisions") exposure_subdivisions = static_cast<int>(integer());
    else if (key == "surface.gain_subdivisions") gain_subdivisions = static_cast<int>(integer());
    else if (key == "seed") seed = static_cast<std::uint64_t>(integer());
    else throw ConfigError("unknown key '" + key + "'");
  }

  void validate() const {
    metric.validate();
    controller.nm.validate();
    if (!(controller.epsilon > 0)) throw ConfigError("controller.epsilon must be > 0");
    if (!(controller.kappa >= 0)) throw ConfigError("controller.kappa must be >= 0");
    if (controller.stop.max_iterations < 1) throw ConfigError("controller.max_iterations must be >= 1");
    if (exposure_subdivisions < 1 || gain_subdivisions < 1) {
      throw ConfigError("surface subdivisions must be >= 1");
    }
    if (camera) {
      if (camera->kind == CameraKind::Synthetic && camera->scene.empty()) {
        throw ConfigError("synthetic camera needs camera.scene");
      }
      if (camera->kind != CameraKind::Synthetic && camera->manifest.empty()) {
        throw ConfigError("replay and surface cameras need camera.manifest");
      }
      camera->model.validate();
    }
  }
};

inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) cfg.set(k, v, base_dir);
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path.parent_path());
}

}  // namespace aexp
