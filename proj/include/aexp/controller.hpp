// Nelder-Mead exposure/gain search.
//
// The controller maximizes the fused quality score over (exposure time, gain)
// by running the downhill simplex method on its negation. The initial simplex
// is sized from the mean intensity of the first frame: dark frames push both
// parameters up, bright frames pull them down. Every candidate is clamped to
// the parameter bounds before a frame is requested for it.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aexp/image.hpp"
#include "aexp/metric.hpp"
#include "aexp/text.hpp"

namespace aexp {

struct ExposureParams {
  double exposure_ms = 0;
  double gain_db = 0;

  friend bool operator==(const ExposureParams&, const ExposureParams&) = default;
};

struct ParamBounds {
  double min_ms = 4;
  double max_ms = 67;
  double min_db = 0;
  double max_db = 24;

  /// Sweep ranges of the indoor capture protocol.
  static ParamBounds indoor() { return {4, 67, 0, 24}; }
  /// Sweep ranges of the outdoor capture protocol.
  static ParamBounds outdoor() { return {0.1, 7.45, 0, 20}; }

  void validate() const {
    if (!(min_ms > 0 && min_ms < max_ms)) {
      throw ConfigError("bounds: need 0 < exposure min < exposure max");
    }
    if (!(min_db < max_db)) throw ConfigError("bounds: need gain min < gain max");
  }

  [[nodiscard]] double exposure_range() const noexcept { return max_ms - min_ms; }
  [[nodiscard]] double gain_range() const noexcept { return max_db - min_db; }

  [[nodiscard]] ExposureParams clamp(ExposureParams p) const noexcept {
    p.exposure_ms = std::clamp(p.exposure_ms, min_ms, max_ms);
    p.gain_db = std::clamp(p.gain_db, min_db, max_db);
    return p;
  }

  [[nodiscard]] bool contains(const ExposureParams& p) const noexcept {
    return p.exposure_ms >= min_ms && p.exposure_ms <= max_ms && p.gain_db >= min_db &&
           p.gain_db <= max_db;
  }
};

/// Smallest parameter increments a camera distinguishes.
struct Quantization {
  double exposure_ms = 0.001;
  double gain_db = 0.1;
};

struct NmCoefficients {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;

  void validate() const {
    if (!(reflection > 0 && expansion > 1 && expansion > reflection && contraction > 0 &&
          contraction < 1 && shrink > 0 && shrink < 1)) {
      throw ConfigError("nelder-mead: need rho > 0, chi > max(1, rho), 0 < psi < 1, 0 < sigma < 1");
    }
  }
};

/// The search stops when any rule fires.
struct StoppingRule {
  double min_diameter = 0.01;   // bounds-normalized max pairwise vertex distance
  double min_improvement = 1e-3;
  int patience = 5;             // consecutive iterations below min_improvement
  int max_iterations = 50;
};

struct ControllerSettings {
  double epsilon = 1.7;  // initial step scale
  double kappa = 0.5;    // below this magnitude a component is stepped additively
  NmCoefficients nm;
  StoppingRule stop;
  Quantization quantum;
};

struct Vertex {
  ExposureParams params;
  double score = -std::numeric_limits<double>::infinity();
};

/// Three scored vertices; after order() they run best, second worst, worst.
class Simplex {
 public:
  Simplex() = default;
  explicit Simplex(std::array<Vertex, 3> v) : v_(v) {}

  void order() {
    std::stable_sort(v_.begin(), v_.end(),
                     [](const Vertex& a, const Vertex& b) { return a.score > b.score; });
  }

  [[nodiscard]] const Vertex& best() const noexcept { return v_[0]; }
  [[nodiscard]] const Vertex& second_worst() const noexcept { return v_[1]; }
  [[nodiscard]] const Vertex& worst() const noexcept { return v_[2]; }
  [[nodiscard]] const std::array<Vertex, 3>& vertices() const noexcept { return v_; }
  Vertex& operator[](std::size_t i) { return v_[i]; }
  const Vertex& operator[](std::size_t i) const { return v_[i]; }

  [[nodiscard]] bool is_ordered() const noexcept {
    return v_[0].score >= v_[1].score && v_[1].score >= v_[2].score;
  }

  /// Largest pairwise distance, each axis divided by its bounds range.
  [[nodiscard]] double diameter(const ParamBounds& bounds) const noexcept {
    double d = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        const double de =
            (v_[i].params.exposure_ms - v_[j].params.exposure_ms) / bounds.exposure_range();
        const double dg = (v_[i].params.gain_db - v_[j].params.gain_db) / bounds.gain_range();
        d = std::max(d, std::hypot(de, dg));
      }
    }
    return d;
  }

 private:
  std::array<Vertex, 3> v_{};
};

enum class SimplexOp { Init, Reflect, Expand, Contract, Shrink };

inline const char* to_string(SimplexOp op) {
  switch (op) {
    case SimplexOp::Init: return "init";
    case SimplexOp::Reflect: return "reflect";
    case SimplexOp::Expand: return "expand";
    case SimplexOp::Contract: return "contract";
    case SimplexOp::Shrink: return "shrink";
  }
  return "?";
}

struct Capture {
  int iteration = 0;
  ExposureParams params;
  double score = 0;
};

struct TraceRecord {
  int iteration = 0;
  SimplexOp op = SimplexOp::Init;
  Simplex simplex;  // ordered, after the update
  int frames = 0;   // captures requested during this iteration
};

/// Append-only log of the search.
class ControlTrace {
 public:
  void append(TraceRecord record) {
    if (!records_.empty() && record.iteration <= records_.back().iteration) {
      throw std::logic_error("trace iterations must be strictly increasing");
    }
    records_.push_back(record);
  }
  void add_capture(Capture c) { captures_.push_back(c); }

  [[nodiscard]] const std::vector<TraceRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const std::vector<Capture>& captures() const noexcept { return captures_; }
  /// Number of simplex updates after initialization.
  [[nodiscard]] int iterations() const noexcept {
    return records_.empty() ? 0 : records_.back().iteration;
  }

  /// iteration,op,then exposure_ms,gain_db,score for each ordered vertex.
  [[nodiscard]] std::string to_csv() const {
    std::string out = csv::row({"iteration", "op", "exposure_ms_0", "gain_db_0", "score_0",
                                "exposure_ms_1", "gain_db_1", "score_1", "exposure_ms_2",
                                "gain_db_2", "score_2"});
    for (const auto& r : records_) {
      std::vector<std::string> f{std::to_string(r.iteration), to_string(r.op)};
      for (const auto& v : r.simplex.vertices()) {
        f.push_back(format_number(v.params.exposure_ms));
        f.push_back(format_number(v.params.gain_db));
        f.push_back(format_number(v.score));
      }
      out += csv::row(f);
    }
    return out;
  }

 private:
  std::vector<TraceRecord> records_;
  std::vector<Capture> captures_;
};

/// Initial step along each axis from the mean intensity of the current frame.
/// Bright frames (mean >= 128) give a negative step.
inline double initial_step(double mean_intensity, double epsilon) {
  const double j = mean_intensity / 255.0;
  if (mean_intensity >= 128.0) return -j / epsilon;
  return epsilon * (1.0 - j);
}

/// Vertices {x0, x0 with exposure stepped by h, x0 with gain stepped by h}.
/// A component is scaled by (1 + h) unless its magnitude is below kappa, in
/// which case h * kappa is added. Stepped vertices that clamp back onto x0
/// move one quantization step into the interior.
inline std::array<ExposureParams, 3> simplex_vertices(ExposureParams x0, double h,
                                                      const ParamBounds& bounds,
                                                      const ControllerSettings& settings = {}) {
  x0 = bounds.clamp(x0);
  const auto step = [&](double v) {
    return std::abs(v) < settings.kappa ? v + h * settings.kappa : v * (1.0 + h);
  };
  const auto separate = [](double v, double origin, double hi, double q) {
    if (v != origin) return v;
    return origin + q <= hi ? origin + q : origin - q;
  };

  ExposureParams by_exposure = x0;
  by_exposure.exposure_ms = std::clamp(step(x0.exposure_ms), bounds.min_ms, bounds.max_ms);
  by_exposure.exposure_ms = separate(by_exposure.exposure_ms, x0.exposure_ms, bounds.max_ms,
                                     settings.quantum.exposure_ms);

  ExposureParams by_gain = x0;
  by_gain.gain_db = std::clamp(step(x0.gain_db), bounds.min_db, bounds.max_db);
  by_gain.gain_db =
      separate(by_gain.gain_db, x0.gain_db, bounds.max_db, settings.quantum.gain_db);
  return {x0, by_exposure, by_gain};
}

/// Initial simplex around x0 sized from the current frame's mean intensity.
inline std::array<ExposureParams, 3> initial_simplex(ExposureParams x0, double mean_intensity,
                                                     const ParamBounds& bounds,
                                                     const ControllerSettings& settings = {}) {
  return simplex_vertices(x0, initial_step(mean_intensity, settings.epsilon), bounds, settings);
}

/// True when the simplex has collapsed, the best score has stalled for
/// `patience` iterations, or the iteration budget is spent.
inline bool should_stop(const Simplex& simplex, const ControlTrace& trace,
                        const StoppingRule& stop, const ParamBounds& bounds) {
  if (simplex.diameter(bounds) < stop.min_diameter) return true;
  if (trace.iterations() >= stop.max_iterations) return true;
  const auto& recs = trace.records();
  if (stop.patience > 0 && recs.size() > static_cast<std::size_t>(stop.patience)) {
    bool stalled = true;
    for (std::size_t i = recs.size() - static_cast<std::size_t>(stop.patience); i < recs.size();
         ++i) {
      const double gain = recs[i].simplex.best().score - recs[i - 1].simplex.best().score;
      if (!(gain < stop.min_improvement)) {
        stalled = false;
        break;
      }
    }
    if (stalled) return true;
  }
  return false;
}

/// What the controller sees of one capture.
struct Observation {
  double score = 0;
  double mean_intensity = 0;
};

/// Anything that turns exposure parameters into a scored observation.
template <typename T>
concept Observer = requires(T& o, const ExposureParams& p) {
  { o.observe(p) } -> std::convertible_to<Observation>;
};

/// Anything that captures an image at given exposure parameters.
template <typename T>
concept FrameSource = requires(T& c, const ExposureParams& p) {
  { c.capture(p) } -> std::convertible_to<Image>;
};

/// Scores frames from a camera with the fused quality metric.
template <FrameSource Camera>
class FrameObserver {
 public:
  FrameObserver(Camera& camera, MetricConfig cfg) : camera_(camera), cfg_(cfg) {}

  Observation observe(const ExposureParams& p) {
    const Image frame = camera_.capture(p);
    return {evaluate(frame, cfg_).fused, mean_intensity(frame)};
  }

 private:
  Camera& camera_;
  MetricConfig cfg_;
};

struct ControlResult {
  ExposureParams params;
  double score = -std::numeric_limits<double>::infinity();
  ControlTrace trace;
  std::optional<std::string> failure;  // set when a capture threw
};

namespace detail {

inline ExposureParams affine(const ExposureParams& origin, const ExposureParams& toward,
                             double t) {
  return {origin.exposure_ms + t * (toward.exposure_ms - origin.exposure_ms),
          origin.gain_db + t * (toward.gain_db - origin.gain_db)};
}

template <Observer Obs>
class SimplexSearch {
 public:
  SimplexSearch(Obs& obs, const ParamBounds& bounds, const ControllerSettings& s,
                ControlTrace& trace)
      : obs_(obs), bounds_(bounds), s_(s), trace_(trace) {}

  Observation observe(const ExposureParams& p) {
    Observation o = obs_.observe(p);
    if (!std::isfinite(o.score)) o.score = -std::numeric_limits<double>::infinity();
    trace_.add_capture({iteration_, p, o.score});
    ++frames_;
    return o;
  }

  Vertex scored(const ExposureParams& raw) {
    const ExposureParams p = bounds_.clamp(raw);
    return {p, observe(p).score};
  }

  void record(SimplexOp op, Simplex& simplex) {
    simplex.order();
    trace_.append({iteration_, op, simplex, frames_});
  }

  /// One Nelder-Mead update of an ordered simplex (maximizing).
  SimplexOp step(Simplex& simplex) {
    ++iteration_;
    frames_ = 0;
    const auto& nm = s_.nm;
    const Vertex best = simplex.best();
    const Vertex second = simplex.second_worst();
    const Vertex worst = simplex.worst();
    const ExposureParams centroid = affine(best.params, second.params, 0.5);

    const Vertex reflected = scored(affine(centroid, worst.params, -nm.reflection));
    if (reflected.score > best.score) {
      const Vertex expanded =
          scored(affine(centroid, worst.params, -nm.reflection * nm.expansion));
      if (expanded.score > reflected.score) {
        simplex[2] = expanded;
        return SimplexOp::Expand;
      }
      simplex[2] = reflected;
      return SimplexOp::Reflect;
    }
    if (reflected.score > second.score) {
      simplex[2] = reflected;
      return SimplexOp::Reflect;
    }
    if (reflected.score > worst.score) {
      const Vertex outside =
          scored(affine(centroid, worst.params, -nm.reflection * nm.contraction));
      if (outside.score >= reflected.score) {
        simplex[2] = outside;
        return SimplexOp::Contract;
      }
    } else {
      const Vertex inside = scored(affine(centroid, worst.params, nm.contraction));
      if (inside.score > worst.score) {
        simplex[2] = inside;
        return SimplexOp::Contract;
      }
    }
    for (std::size_t i = 1; i < 3; ++i) {
      simplex[i] = scored(affine(best.params, simplex[i].params, nm.shrink));
    }
    return SimplexOp::Shrink;
  }

  [[nodiscard]] int frames() const noexcept { return frames_; }

 private:
  Obs& obs_;
  const ParamBounds& bounds_;
  const ControllerSettings& s_;
  ControlTrace& trace_;
  int iteration_ = 0;
  int frames_ = 0;
};

}  // namespace detail

/// Runs the search from x0 until the stopping rule fires. A throwing capture
/// ends the run early with the trace collected so far.
template <Observer Obs>
ControlResult run(Obs& observer, ExposureParams x0, const ParamBounds& bounds,
                  const ControllerSettings& settings = {}) {
  bounds.validate();
  settings.nm.validate();
  ControlResult result;
  detail::SimplexSearch<Obs> search(observer, bounds, settings, result.trace);
  Simplex simplex;
  try {
    x0 = bounds.clamp(x0);
    const Observation first = search.observe(x0);
    const auto start = initial_simplex(x0, first.mean_intensity, bounds, settings);
    simplex[0] = {start[0], first.score};
    simplex[1] = search.scored(start[1]);
    simplex[2] = search.scored(start[2]);
    search.record(SimplexOp::Init, simplex);
    while (!should_stop(simplex, result.trace, settings.stop, bounds)) {
      const SimplexOp op = search.step(simplex);
      search.record(op, simplex);
    }
  } catch (const std::exception& e) {
    result.failure = e.what();
    if (result.trace.records().empty()) {
      result.params = x0;
      return result;
    }
  }
  simplex = result.trace.records().back().simplex;
  result.params = simplex.best().params;
  result.score = simplex.best().score;
  return result;
}

/// Runs the search against a camera, scoring each frame with `cfg`.
template <FrameSource Camera>
ControlResult run(Camera& camera, const MetricConfig& cfg, ExposureParams x0,
                  const ParamBounds& bounds, const ControllerSettings& settings = {}) {
  FrameObserver<Camera> observer(camera, cfg);
  return run(observer, x0, bounds, settings);
}

}  // namespace aexp
