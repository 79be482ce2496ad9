// Noise-aware image quality metric.
//
// The fused score combines three terms computed on an 8-bit image:
//
//   * L_gradient: per-pixel gradient magnitudes pass through a thresholded
//     log mapping, are summed over an sqrt(n) x sqrt(n) grid of cells, and the
//     ratio mean/stddev of the cell sums rewards strong *and* uniformly spread
//     gradient information.
//   * L_entropy: scaled Shannon entropy of the gray-level histogram.
//   * sigma_noise: Laplacian-difference noise estimate restricted to
//     unsaturated, homogeneous pixels (the lowest-gradient p-fraction).
//
//   fused = alpha * L_gradient + (1 - alpha) * L_entropy - beta * sigma_noise
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aexp/image.hpp"
#include "aexp/text.hpp"

namespace aexp {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MetricConfig {
  double gamma = 0.06;    // activation threshold of the gradient mapping
  double lambda = 1e3;    // steepness of the gradient mapping
  int n_cells = 100;      // perfect square
  double p = 0.1;         // homogeneous-pixel quantile (fraction)
  double tau_l = 15;
  double tau_h = 235;
  double k_g = 2;
  double k_e = 0.125;
  double alpha = 0.4;
  double beta = 0.4;
  double s_floor = 1e-4;  // added to the cell-sum stddev
  double sigma_max = 25;  // substituted when the noise level is unestimable

  [[nodiscard]] int grid_side() const noexcept {
    return static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_cells))));
  }

  void validate() const {
    const auto fail = [](const std::string& m) { throw ConfigError("metric config: " + m); };
    if (!(gamma >= 0 && gamma < 1)) fail("gamma must be in [0, 1)");
    if (!(lambda > 0)) fail("lambda must be > 0");
    if (n_cells < 4 || grid_side() * grid_side() != n_cells) {
      fail("n_cells must be a perfect square >= 4");
    }
    if (!(p > 0 && p < 1)) fail("p must be in (0, 1)");
    if (!(tau_l >= 0 && tau_l < tau_h && tau_h <= 255)) fail("need 0 <= tau_l < tau_h <= 255");
    if (!(alpha >= 0 && alpha <= 1)) fail("alpha must be in [0, 1]");
    if (!(beta >= 0)) fail("beta must be >= 0");
    if (!(s_floor > 0)) fail("s_floor must be > 0");
    if (!(sigma_max >= 0)) fail("sigma_max must be >= 0");
    if (!std::isfinite(k_g) || !std::isfinite(k_e)) fail("k_g and k_e must be finite");
  }

  /// Sets a field by its key name. Returns false for unknown keys.
  bool set(std::string_view key, std::string_view value) {
    const auto number = [&]() {
      auto v = parse_double(value);
      if (!v) throw ConfigError("metric config: bad number '" + std::string(value) +
                                "' for key '" + std::string(key) + "'");
      return *v;
    };
    if (key == "gamma") gamma = number();
    else if (key == "lambda") lambda = number();
    else if (key == "n_cells") {
      auto v = parse_int(value);
      if (!v) throw ConfigError("metric config: n_cells must be an integer");
      n_cells = static_cast<int>(*v);
    }
    else if (key == "p") p = number();
    else if (key == "tau_l") tau_l = number();
    else if (key == "tau_h") tau_h = number();
    else if (key == "k_g") k_g = number();
    else if (key == "k_e") k_e = number();
    else if (key == "alpha") alpha = number();
    else if (key == "beta") beta = number();
    else if (key == "s_floor") s_floor = number();
    else if (key == "sigma_max") sigma_max = number();
    else return false;
    return true;
  }

  [[nodiscard]] std::vector<std::pair<std::string, std::string>> to_key_values() const {
    return {{"gamma", format_exact(gamma)},     {"lambda", format_exact(lambda)},
            {"n_cells", std::to_string(n_cells)}, {"p", format_exact(p)},
            {"tau_l", format_exact(tau_l)},     {"tau_h", format_exact(tau_h)},
            {"k_g", format_exact(k_g)},         {"k_e", format_exact(k_e)},
            {"alpha", format_exact(alpha)},     {"beta", format_exact(beta)},
            {"s_floor", format_exact(s_floor)}, {"sigma_max", format_exact(sigma_max)}};
  }
};

struct QualityBreakdown {
  double l_gradient = 0;
  double l_entropy = 0;
  double sigma_noise = 0;  // sigma_max when noise_estimable is false
  double fused = 0;
  bool noise_estimable = true;
};

/// Noise level and the number of pixels that supported it. An estimate with
/// zero support is unestimable and carries no value.
struct NoiseEstimate {
  std::optional<double> sigma;
  std::size_t support = 0;

  [[nodiscard]] bool estimable() const noexcept { return sigma.has_value(); }
};

/// Thresholded log mapping of a gradient magnitude to information content.
inline double map_gradient(double g, const MetricConfig& cfg) {
  if (g < cfg.gamma) return 0.0;
  const double norm = std::log(cfg.lambda * (1.0 - cfg.gamma) + 1.0);
  return std::min(1.0, std::log(cfg.lambda * (g - cfg.gamma) + 1.0) / norm);
}

namespace detail {

/// Cell index for each coordinate along an axis of `extent` pixels split into
/// `cells` parts with boundaries at round(k * extent / cells).
inline std::vector<int> cell_lookup(int extent, int cells) {
  std::vector<int> idx(static_cast<std::size_t>(extent));
  int k = 0;
  for (int x = 0; x < extent; ++x) {
    while (x >= static_cast<int>(std::lround(static_cast<double>(k + 1) * extent / cells))) ++k;
    idx[static_cast<std::size_t>(x)] = k;
  }
  return idx;
}

}  // namespace detail

/// K_g * mean(G) / (stddev(G) + s_floor) over the grid-cell sums G of the
/// mapped gradient field. Population standard deviation.
inline double gradient_score(const GradientField& field, const MetricConfig& cfg) {
  const int side = cfg.grid_side();
  if (field.width < side || field.height < side) {
    throw DimensionError("gradient_score: field " + std::to_string(field.width) + "x" +
                         std::to_string(field.height) + " smaller than the " +
                         std::to_string(side) + "x" + std::to_string(side) + " grid");
  }
  const auto col_cell = detail::cell_lookup(field.width, side);
  const auto row_cell = detail::cell_lookup(field.height, side);
  std::vector<double> cells(static_cast<std::size_t>(side) * side, 0.0);

  // The mapping is a function of g alone; memoize per distinct magnitude run.
  double last_g = -1.0;
  double last_mapped = 0.0;
  for (int y = 0; y < field.height; ++y) {
    double* row = cells.data() + static_cast<std::size_t>(row_cell[y]) * side;
    const double* g = field.values.data() + static_cast<std::size_t>(y) * field.width;
    for (int x = 0; x < field.width; ++x) {
      if (g[x] < cfg.gamma) continue;
      if (g[x] != last_g) {
        last_g = g[x];
        last_mapped = map_gradient(g[x], cfg);
      }
      row[col_cell[x]] += last_mapped;
    }
  }

  const double n = static_cast<double>(cells.size());
  double mean = 0.0;
  for (const double c : cells) mean += c;
  mean /= n;
  double var = 0.0;
  for (const double c : cells) var += (c - mean) * (c - mean);
  const double sd = std::sqrt(var / n);
  return cfg.k_g * mean / (sd + cfg.s_floor);
}

/// Normalized 256-bin histogram of a single-channel image.
inline std::array<double, 256> histogram(const Image& img) {
  require_gray(img, "histogram");
  std::array<std::uint64_t, 256> counts{};
  for (const auto v : img.data()) ++counts[v];
  std::array<double, 256> prob{};
  const double n = static_cast<double>(img.pixel_count());
  for (std::size_t k = 0; k < 256; ++k) prob[k] = static_cast<double>(counts[k]) / n;
  return prob;
}

/// K_e times the Shannon entropy (bits) of the gray-level histogram.
inline double entropy_score(const Image& img, const MetricConfig& cfg) {
  double h = 0.0;
  for (const double pk : histogram(img)) {
    if (pk > 0) h -= pk * std::log2(pk);
  }
  return cfg.k_e * h;
}

namespace detail {

inline constexpr int kMaxSquaredDifference = 2 * 255 * 255;

struct ChannelNoise {
  double abs_sum = 0;  // sum of |I * M| over supporting pixels
  std::size_t support = 0;
};

/// Noise statistics of one channel. Homogeneity is decided on the channel's
/// own gradients: doubled central differences give the integer key
/// dx^2 + dy^2, monotone in the gradient magnitude, so the p-quantile is
/// found exactly with a counting pass.
inline ChannelNoise channel_noise(const Image& ch, const MetricConfig& cfg) {
  const int w = ch.width();
  const int h = ch.height();
  std::vector<std::int32_t> keys(ch.pixel_count());
  std::vector<std::uint32_t> counts(kMaxSquaredDifference + 1, 0);
  for_each_difference(ch, [&](std::size_t i, int dx, int dy) {
    const int q = dx * dx + dy * dy;
    keys[i] = q;
    ++counts[static_cast<std::size_t>(q)];
  });

  // Smallest key such that at least ceil(p * N) pixels are <= it.
  const auto n = static_cast<double>(keys.size());
  const auto rank = static_cast<std::uint64_t>(std::max(1.0, std::ceil(cfg.p * n)));
  std::uint64_t seen = 0;
  int threshold = 0;
  for (; threshold <= kMaxSquaredDifference; ++threshold) {
    seen += counts[static_cast<std::size_t>(threshold)];
    if (seen >= rank) break;
  }

  const auto px = ch.data();
  const int lo = static_cast<int>(std::ceil(cfg.tau_l));
  const int hi = static_cast<int>(std::floor(cfg.tau_h));
  ChannelNoise out;
  for (int y = 1; y < h - 1; ++y) {
    const std::uint8_t* up = px.data() + static_cast<std::size_t>(y - 1) * w;
    const std::uint8_t* mid = up + w;
    const std::uint8_t* down = mid + w;
    const std::int32_t* key = keys.data() + static_cast<std::size_t>(y) * w;
    for (int x = 1; x < w - 1; ++x) {
      const int v = mid[x];
      if (key[x] > threshold || v < lo || v > hi) continue;
      // [1 -2 1]^T [1 -2 1] applied as rows, then combined.
      const int r0 = up[x - 1] - 2 * up[x] + up[x + 1];
      const int r1 = mid[x - 1] - 2 * v + mid[x + 1];
      const int r2 = down[x - 1] - 2 * down[x] + down[x + 1];
      out.abs_sum += std::abs(r0 - 2 * r1 + r2);
      ++out.support;
    }
  }
  return out;
}

}  // namespace detail

/// Laplacian-difference noise level (intensity units) over unsaturated
/// homogeneous pixels, averaged across channels that have support.
/// sqrt(pi/2) * sum |I * M| / (6 * N_S); the 1/6 undoes the kernel's gain on
/// white Gaussian noise.
inline NoiseEstimate noise_sigma(const Image& img, const MetricConfig& cfg) {
  double total = 0.0;
  int estimable = 0;
  NoiseEstimate out;
  for (int c = 0; c < img.channels(); ++c) {
    const auto stats = detail::channel_noise(img.channels() == 1 ? img : img.channel(c), cfg);
    out.support += stats.support;
    if (stats.support == 0) continue;
    total += std::sqrt(std::numbers::pi / 2.0) * stats.abs_sum /
             (6.0 * static_cast<double>(stats.support));
    ++estimable;
  }
  if (estimable > 0) out.sigma = total / estimable;
  return out;
}

inline double fuse(double l_gradient, double l_entropy, double sigma_noise,
                   const MetricConfig& cfg) {
  return cfg.alpha * l_gradient + (1.0 - cfg.alpha) * l_entropy - cfg.beta * sigma_noise;
}

inline QualityBreakdown evaluate(const Image& img, const MetricConfig& cfg) {
  const Image gray = to_grayscale(img);
  QualityBreakdown q;
  q.l_gradient = gradient_score(gradient_magnitude(gray), cfg);
  q.l_entropy = entropy_score(gray, cfg);
  const auto noise = noise_sigma(img, cfg);
  q.noise_estimable = noise.estimable();
  q.sigma_noise = noise.sigma.value_or(cfg.sigma_max);
  q.fused = fuse(q.l_gradient, q.l_entropy, q.sigma_noise, cfg);
  return q;
}

}  // namespace aexp
