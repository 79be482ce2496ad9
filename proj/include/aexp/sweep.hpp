// Exposure/gain sweep grids, their on-disk manifest, and a replay camera
// that serves the nearest pre-captured frame.
//
// Manifest format: CSV with header `exposure_ms,gain_db,path`; one row per
// frame, paths relative to the manifest's directory. The (exposure, gain)
// pairs must form a complete rectangular grid with uniform steps.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aexp/controller.hpp"
#include "aexp/pnm.hpp"
#include "aexp/text.hpp"

namespace aexp {

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform rectangular grid of exposure times and gains.
struct SweepGrid {
  std::vector<double> exposures;  // ascending
  std::vector<double> gains;      // ascending

  [[nodiscard]] std::size_t size() const noexcept { return exposures.size() * gains.size(); }
  [[nodiscard]] std::size_t index(std::size_t ei, std::size_t gi) const noexcept {
    return gi * exposures.size() + ei;
  }
  [[nodiscard]] double exposure_step() const {
    return (exposures.back() - exposures.front()) / static_cast<double>(exposures.size() - 1);
  }
  [[nodiscard]] double gain_step() const {
    return (gains.back() - gains.front()) / static_cast<double>(gains.size() - 1);
  }
  [[nodiscard]] ParamBounds hull() const {
    return {exposures.front(), exposures.back(), gains.front(), gains.back()};
  }
  [[nodiscard]] ExposureParams at(std::size_t ei, std::size_t gi) const {
    return {exposures[ei], gains[gi]};
  }

  /// Nearest grid index along one axis, ties toward the smaller value.
  static std::size_t nearest(const std::vector<double>& axis, double v) {
    const double step = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
    const double u = (std::clamp(v, axis.front(), axis.back()) - axis.front()) / step;
    const double k = std::ceil(u - 0.5 - 1e-9);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(axis.size() - 1)));
  }

  /// Grid point nearest in step-normalized coordinates, after clamping to the hull.
  [[nodiscard]] std::pair<std::size_t, std::size_t> nearest(const ExposureParams& p) const {
    return {nearest(exposures, p.exposure_ms), nearest(gains, p.gain_db)};
  }

  /// Evenly spaced axis of n values from first with the given step.
  static std::vector<double> axis(double first, double step, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = first + step * static_cast<double>(i);
    return v;
  }

  /// 22 exposures (4..67 ms, 3 ms) x 25 gains (0..24 dB, 1 dB).
  static SweepGrid indoor() { return {axis(4, 3, 22), axis(0, 1, 25)}; }
  /// 50 exposures (0.1..7.45 ms, 0.15 ms) x 11 gains (0..20 dB, 2 dB).
  static SweepGrid outdoor() { return {axis(0.1, 0.15, 50), axis(0, 2, 11)}; }
};

struct ManifestEntry {
  double exposure_ms = 0;
  double gain_db = 0;
  std::filesystem::path path;
};

class SweepManifest {
 public:
  /// Validates and indexes entries. Relative paths resolve against base_dir.
  static SweepManifest from_entries(const std::vector<ManifestEntry>& entries,
                                    const std::filesystem::path& base_dir) {
    if (entries.empty()) throw ManifestError("manifest has no entries");
    SweepManifest m;
    m.base_dir_ = base_dir;
    m.grid_.exposures = distinct_axis(entries, &ManifestEntry::exposure_ms, "exposure_ms");
    m.grid_.gains = distinct_axis(entries, &ManifestEntry::gain_db, "gain_db");
    m.paths_.assign(m.grid_.size(), {});
    std::vector<bool> seen(m.grid_.size(), false);
    for (const auto& e : entries) {
      const std::size_t ei = locate(m.grid_.exposures, e.exposure_ms);
      const std::size_t gi = locate(m.grid_.gains, e.gain_db);
      const std::size_t k = m.grid_.index(ei, gi);
      if (seen[k]) {
        throw ManifestError("duplicate grid point exposure_ms=" + format_number(e.exposure_ms) +
                            " gain_db=" + format_number(e.gain_db));
      }
      seen[k] = true;
      m.paths_[k] = e.path.is_absolute() ? e.path : base_dir / e.path;
    }
    std::string missing;
    std::size_t n_missing = 0;
    for (std::size_t gi = 0; gi < m.grid_.gains.size(); ++gi) {
      for (std::size_t ei = 0; ei < m.grid_.exposures.size(); ++ei) {
        if (seen[m.grid_.index(ei, gi)]) continue;
        ++n_missing;
        missing += "\n  exposure_ms=" + format_number(m.grid_.exposures[ei]) +
                   " gain_db=" + format_number(m.grid_.gains[gi]);
      }
    }
    if (n_missing > 0) {
      throw ManifestError("incomplete grid: " + std::to_string(n_missing) +
                          " missing combination(s):" + missing);
    }
    return m;
  }

  static SweepManifest parse(const std::string& text, const std::filesystem::path& base_dir) {
    std::vector<std::vector<std::string>> rows;
    try {
      rows = csv::parse(text);
    } catch (const csv::CsvError& e) {
      throw ManifestError(std::string("manifest: ") + e.what());
    }
    if (rows.empty() || rows[0] != std::vector<std::string>{"exposure_ms", "gain_db", "path"}) {
      throw ManifestError("manifest: header must be exposure_ms,gain_db,path");
    }
    std::vector<ManifestEntry> entries;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() == 1 && trim(row[0]).empty()) continue;
      if (row.size() != 3) {
        throw ManifestError("manifest line " + std::to_string(r + 1) + ": expected 3 fields");
      }
      const auto e = parse_double(row[0]);
      const auto g = parse_double(row[1]);
      if (!e || !(*e > 0)) {
        throw ManifestError("manifest line " + std::to_string(r + 1) + ": bad exposure_ms '" +
                            row[0] + "'");
      }
      if (!g || !std::isfinite(*g)) {
        throw ManifestError("manifest line " + std::to_string(r + 1) + ": bad gain_db '" +
                            row[1] + "'");
      }
      entries.push_back({*e, *g, std::filesystem::path(row[2])});
    }
    return from_entries(entries, base_dir);
  }

  static SweepManifest load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text, path.parent_path());
  }

  [[nodiscard]] const SweepGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] const std::filesystem::path& path_at(std::size_t ei, std::size_t gi) const {
    return paths_[grid_.index(ei, gi)];
  }
  [[nodiscard]] Image load_at(std::size_t ei, std::size_t gi) const {
    const auto& p = path_at(ei, gi);
    if (!std::filesystem::exists(p)) throw IoError("missing image file '" + p.string() + "'");
    return read_pnm(p);
  }

 private:
  template <typename Member>
  static std::vector<double> distinct_axis(const std::vector<ManifestEntry>& entries,
                                           Member member, const char* name) {
    std::vector<double> v;
    v.reserve(entries.size());
    for (const auto& e : entries) v.push_back(e.*member);
    std::sort(v.begin(), v.end());
    const double span = v.back() - v.front();
    const double tol = 1e-9 * std::max(1.0, span);
    std::vector<double> axis;
    for (const double x : v) {
      if (axis.empty() || x - axis.back() > tol) axis.push_back(x);
    }
    if (axis.size() < 2) {
      throw ManifestError(std::string("manifest: ") + name + " needs at least 2 distinct values");
    }
    const double step = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
    for (std::size_t i = 1; i < axis.size(); ++i) {
      if (std::abs((axis[i] - axis[i - 1]) - step) > 1e-6 * std::max(1.0, step)) {
        throw ManifestError(std::string("manifest: ") + name + " values are not evenly spaced");
      }
    }
    return axis;
  }

  static std::size_t locate(const std::vector<double>& axis, double v) {
    const auto it = std::min_element(axis.begin(), axis.end(), [v](double a, double b) {
      return std::abs(a - v) < std::abs(b - v);
    });
    return static_cast<std::size_t>(it - axis.begin());
  }

  SweepGrid grid_;
  std::vector<std::filesystem::path> paths_;
  std::filesystem::path base_dir_;
};

/// Serves the pre-captured frame nearest to the requested parameters.
class ReplayCamera {
 public:
  explicit ReplayCamera(SweepManifest manifest) : manifest_(std::move(manifest)) {}

  [[nodiscard]] Image capture(const ExposureParams& params) const {
    const auto [ei, gi] = manifest_.grid().nearest(params);
    return manifest_.load_at(ei, gi);
  }

  [[nodiscard]] const SweepManifest& manifest() const noexcept { return manifest_; }

 private:
  SweepManifest manifest_;
};

/// Renders every grid point with `capture` into dir and writes manifest.csv.
/// Returns the manifest path.
template <typename CaptureFn>
std::filesystem::path write_sweep(const std::filesystem::path& dir, const SweepGrid& grid,
                                  CaptureFn&& capture) {
  std::filesystem::create_directories(dir);
  std::string text = csv::row({"exposure_ms", "gain_db", "path"});
  for (std::size_t gi = 0; gi < grid.gains.size(); ++gi) {
    for (std::size_t ei = 0; ei < grid.exposures.size(); ++ei) {
      const ExposureParams p = grid.at(ei, gi);
      const Image img = capture(p);
      const std::string name =
          "frame_e" + std::to_string(ei) + "_g" + std::to_string(gi) + (img.channels() == 1 ? ".pgm" : ".ppm");
      write_pnm(img, dir / name);
      text += csv::row({format_number(p.exposure_ms), format_number(p.gain_db), name});
    }
  }
  const auto manifest = dir / "manifest.csv";
  std::ofstream out(manifest, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write manifest '" + manifest.string() + "'");
  return manifest;
}

}  // namespace aexp
