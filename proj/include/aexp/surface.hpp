// Quality-metric surface over a sweep grid, densified with separable
// Catmull-Rom interpolation, and a camera that reads scores off it.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aexp/controller.hpp"
#include "aexp/metric.hpp"
#include "aexp/sweep.hpp"

namespace aexp {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct SurfaceBuildError : std::runtime_error {
  SurfaceBuildError(const std::string& what, ExposureParams at)
      : std::runtime_error(what), params(at) {}
  ExposureParams params;
};

enum class SurfaceTerm { Gradient, Entropy, Noise, Fused };

inline const char* to_string(SurfaceTerm t) {
  switch (t) {
    case SurfaceTerm::Gradient: return "gradient";
    case SurfaceTerm::Entropy: return "entropy";
    case SurfaceTerm::Noise: return "noise";
    case SurfaceTerm::Fused: return "fused";
  }
  return "?";
}

inline std::optional<SurfaceTerm> parse_surface_term(std::string_view s) {
  if (s == "gradient") return SurfaceTerm::Gradient;
  if (s == "entropy") return SurfaceTerm::Entropy;
  if (s == "noise") return SurfaceTerm::Noise;
  if (s == "fused") return SurfaceTerm::Fused;
  return std::nullopt;
}

inline double term_value(const QualityBreakdown& q, SurfaceTerm t) {
  switch (t) {
    case SurfaceTerm::Gradient: return q.l_gradient;
    case SurfaceTerm::Entropy: return q.l_entropy;
    case SurfaceTerm::Noise: return q.sigma_noise;
    case SurfaceTerm::Fused: return q.fused;
  }
  return 0.0;
}

/// Catmull-Rom weights for the four control points around parameter t in [0, 1].
inline std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
          0.5 * (t3 - t2)};
}

/// Raw per-grid-point metric values. Interpolation quanta are the parameter
/// resolution of the SurfaceCamera.
struct MetricSurface {
  SweepGrid grid;
  std::vector<QualityBreakdown> raw;    // grid.index(ei, gi)
  std::vector<double> mean_intensity;   // grid.index(ei, gi)
  Quantization quantum{0.001, 0.1};     // 1 us exposure, 0.1 dB gain

  [[nodiscard]] std::vector<double> values(SurfaceTerm t) const {
    std::vector<double> v(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) v[i] = term_value(raw[i], t);
    return v;
  }

  [[nodiscard]] double raw_value(std::size_t ei, std::size_t gi, SurfaceTerm t) const {
    return term_value(raw[grid.index(ei, gi)], t);
  }

  /// Grid point with the largest value; ties go to lower exposure, then lower gain.
  [[nodiscard]] std::pair<std::size_t, std::size_t> argmax(SurfaceTerm t = SurfaceTerm::Fused) const {
    std::pair<std::size_t, std::size_t> best{0, 0};
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t ei = 0; ei < grid.exposures.size(); ++ei) {
      for (std::size_t gi = 0; gi < grid.gains.size(); ++gi) {
        const double v = raw_value(ei, gi, t);
        if (v > best_v) {
          best_v = v;
          best = {ei, gi};
        }
      }
    }
    return best;
  }
};

namespace detail {

/// Control point along an axis; ghost points beyond either end continue the
/// edge segment linearly.
inline double control_point(const std::vector<double>& v, std::size_t n, std::ptrdiff_t i,
                            std::size_t stride, std::size_t offset) {
  const auto at = [&](std::ptrdiff_t k) { return v[offset + static_cast<std::size_t>(k) * stride]; };
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (i < 0) return n > 1 ? 2 * at(0) - at(1) : at(0);
  if (i > last) return n > 1 ? 2 * at(last) - at(last - 1) : at(last);
  return at(i);
}

}  // namespace detail

/// Bicubic value inside cell (ei, gi) at fractional offsets (te, tg) in [0, 1].
inline double interpolate_cell(const SweepGrid& grid, const std::vector<double>& values,
                               std::size_t ei, double te, std::size_t gi, double tg) {
  const std::size_t ne = grid.exposures.size();
  const std::size_t ng = grid.gains.size();
  const auto we = catmull_rom_weights(te);
  const auto wg = catmull_rom_weights(tg);
  // Interpolate along exposure for the four gain rows, then along gain. Rows
  // outside the grid are extrapolated from the interpolated edge rows.
  std::array<double, 4> rows{};
  const auto row_value = [&](std::ptrdiff_t g) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < 4; ++k) {
      const std::ptrdiff_t e = static_cast<std::ptrdiff_t>(ei) - 1 + k;
      acc += we[static_cast<std::size_t>(k)] *
             detail::control_point(values, ne, e, 1, static_cast<std::size_t>(g) * ne);
    }
    return acc;
  };
  const auto last_g = static_cast<std::ptrdiff_t>(ng) - 1;
  for (std::ptrdiff_t k = 0; k < 4; ++k) {
    const std::ptrdiff_t g = static_cast<std::ptrdiff_t>(gi) - 1 + k;
    if (g < 0) {
      rows[static_cast<std::size_t>(k)] = 2 * row_value(0) - row_value(1);
    } else if (g > last_g) {
      rows[static_cast<std::size_t>(k)] = 2 * row_value(last_g) - row_value(last_g - 1);
    } else {
      rows[static_cast<std::size_t>(k)] = row_value(g);
    }
  }
  double out = 0.0;
  for (std::size_t k = 0; k < 4; ++k) out += wg[k] * rows[k];
  return out;
}

namespace detail {

/// Splits a coordinate into (cell index, offset). The last knot maps to the
/// end of the final cell.
inline std::pair<std::size_t, double> locate_cell(const std::vector<double>& axis, double v) {
  const double step = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
  double u = (v - axis.front()) / step;
  const double cells = static_cast<double>(axis.size() - 1);
  u = std::clamp(u, 0.0, cells);
  double cell = std::floor(u);
  if (cell >= cells) cell = cells - 1;
  double t = u - cell;
  // Snap offsets within rounding noise of a knot so knots are reproduced exactly.
  if (std::abs(t) < 1e-9) t = 0.0;
  if (std::abs(t - 1.0) < 1e-9) t = 1.0;
  return {static_cast<std::size_t>(cell), t};
}

}  // namespace detail

/// Interpolated value of one term; exact at grid points. Throws DomainError
/// outside the grid hull.
inline double surface_score(const MetricSurface& s, const ExposureParams& p,
                            SurfaceTerm term = SurfaceTerm::Fused) {
  const ParamBounds hull = s.grid.hull();
  const double tol_e = 1e-9 * std::max(1.0, hull.exposure_range());
  const double tol_g = 1e-9 * std::max(1.0, hull.gain_range());
  if (!(p.exposure_ms >= hull.min_ms - tol_e && p.exposure_ms <= hull.max_ms + tol_e &&
        p.gain_db >= hull.min_db - tol_g && p.gain_db <= hull.max_db + tol_g)) {
    throw DomainError("surface_score: (" + format_number(p.exposure_ms) + " ms, " +
                      format_number(p.gain_db) + " dB) outside the grid hull");
  }
  const auto [ei, te] = detail::locate_cell(s.grid.exposures, p.exposure_ms);
  const auto [gi, tg] = detail::locate_cell(s.grid.gains, p.gain_db);
  if (te == 0.0 && tg == 0.0) return s.raw_value(ei, gi, term);
  return interpolate_cell(s.grid, s.values(term), ei, te, gi, tg);
}

/// Evaluates the metric at every grid point, using `capture` to obtain frames.
template <typename CaptureFn>
MetricSurface build_surface(const SweepGrid& grid, CaptureFn&& capture, const MetricConfig& cfg) {
  cfg.validate();
  MetricSurface s;
  s.grid = grid;
  s.raw.resize(grid.size());
  s.mean_intensity.resize(grid.size());
  for (std::size_t gi = 0; gi < grid.gains.size(); ++gi) {
    for (std::size_t ei = 0; ei < grid.exposures.size(); ++ei) {
      const ExposureParams p = grid.at(ei, gi);
      try {
        const Image img = capture(p);
        s.raw[grid.index(ei, gi)] = evaluate(img, cfg);
        s.mean_intensity[grid.index(ei, gi)] = mean_intensity(img);
      } catch (const std::exception& e) {
        throw SurfaceBuildError("at exposure_ms=" + format_number(p.exposure_ms) +
                                    " gain_db=" + format_number(p.gain_db) + ": " + e.what(),
                                p);
      }
    }
  }
  return s;
}

inline MetricSurface build_surface(const SweepManifest& manifest, const MetricConfig& cfg) {
  return build_surface(
      manifest.grid(),
      [&](const ExposureParams& p) {
        const auto [ei, gi] = manifest.grid().nearest(p);
        return manifest.load_at(ei, gi);
      },
      cfg);
}

/// Observer that snaps requests to the surface's quanta and reads the
/// interpolated fused score. Repeated requests for the same quantized
/// parameters are served from a cache.
class SurfaceCamera {
 public:
  explicit SurfaceCamera(MetricSurface surface)
      : surface_(std::move(surface)),
        fused_(surface_.values(SurfaceTerm::Fused)) {}

  [[nodiscard]] ExposureParams quantize(const ExposureParams& p) const {
    const ParamBounds hull = surface_.grid.hull();
    const ExposureParams c = hull.clamp(p);
    const auto snap = [](double v, double origin, double q, double hi) {
      return std::min(hi, origin + std::round((v - origin) / q) * q);
    };
    return {snap(c.exposure_ms, hull.min_ms, surface_.quantum.exposure_ms, hull.max_ms),
            snap(c.gain_db, hull.min_db, surface_.quantum.gain_db, hull.max_db)};
  }

  Observation observe(const ExposureParams& p) {
    const ExposureParams q = quantize(p);
    const auto key = std::make_pair(
        std::llround((q.exposure_ms - surface_.grid.exposures.front()) / surface_.quantum.exposure_ms),
        std::llround((q.gain_db - surface_.grid.gains.front()) / surface_.quantum.gain_db));
    if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    const auto [ei, te] = detail::locate_cell(surface_.grid.exposures, q.exposure_ms);
    const auto [gi, tg] = detail::locate_cell(surface_.grid.gains, q.gain_db);
    Observation o{interpolate_cell(surface_.grid, fused_, ei, te, gi, tg),
                  interpolate_cell(surface_.grid, surface_.mean_intensity, ei, te, gi, tg)};
    o.mean_intensity = std::clamp(o.mean_intensity, 0.0, 255.0);
    cache_.emplace(key, o);
    ++frames_;
    return o;
  }

  [[nodiscard]] const MetricSurface& surface() const noexcept { return surface_; }
  [[nodiscard]] std::size_t distinct_frames() const noexcept { return frames_; }

 private:
  MetricSurface surface_;
  std::vector<double> fused_;
  std::map<std::pair<long long, long long>, Observation> cache_;
  std::size_t frames_ = 0;
};

}  // namespace aexp
