// Accuracy study for the noise estimator: inject known Gaussian noise, then
// report bias b, spread s and MSE = b^2 + s^2 of the estimates per level.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aexp/image.hpp"
#include "aexp/metric.hpp"
#include "aexp/random.hpp"
#include "aexp/text.hpp"

namespace aexp {

struct NoiseEvalRow {
  double sigma = 0;
  double s = 0;     // population standard deviation of the estimates
  double b = 0;     // mean estimate minus sigma
  double mse = 0;   // b^2 + s^2
  std::size_t used = 0;
  std::size_t excluded = 0;  // unestimable instances
};

/// Adds N(0, sigma^2) to every sample, rounds, and clips to [0, 255].
inline Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  std::vector<std::uint8_t> out(img.data().begin(), img.data().end());
  if (sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : out) {
      v = static_cast<std::uint8_t>(std::clamp(std::round(v + n(rng)), 0.0, 255.0));
    }
  }
  return Image(img.width(), img.height(), img.channels(), std::move(out));
}

inline std::vector<NoiseEvalRow> noise_eval(std::span<const Image> images,
                                            std::span<const double> sigmas, int trials,
                                            std::uint64_t seed, const MetricConfig& cfg = {}) {
  if (images.empty()) throw std::invalid_argument("noise_eval: need at least one image");
  if (trials < 2) throw std::invalid_argument("noise_eval: trials must be >= 2");
  for (const double s : sigmas) {
    if (!(s >= 0) || !std::isfinite(s)) {
      throw std::invalid_argument("noise_eval: sigma must be finite and >= 0");
    }
  }
  std::vector<NoiseEvalRow> rows;
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    NoiseEvalRow row;
    row.sigma = sigmas[si];
    std::vector<double> estimates;
    for (std::size_t ii = 0; ii < images.size(); ++ii) {
      for (int t = 0; t < trials; ++t) {
        const auto noisy = add_gaussian_noise(
            images[ii], row.sigma,
            derive_seed({seed, bits_of(row.sigma), ii, static_cast<std::uint64_t>(t)}));
        const auto est = noise_sigma(noisy, cfg);
        if (est.estimable()) {
          estimates.push_back(*est.sigma);
        } else {
          ++row.excluded;
        }
      }
    }
    row.used = estimates.size();
    if (estimates.empty()) {
      row.s = row.b = row.mse = std::numeric_limits<double>::quiet_NaN();
    } else {
      double mean = 0.0;
      for (const double e : estimates) mean += e;
      mean /= static_cast<double>(estimates.size());
      double var = 0.0;
      for (const double e : estimates) var += (e - mean) * (e - mean);
      var /= static_cast<double>(estimates.size());
      row.b = mean - row.sigma;
      row.s = std::sqrt(var);
      row.mse = row.b * row.b + row.s * row.s;
    }
    rows.push_back(row);
  }
  return rows;
}

/// CSV with header sigma,s,b,mse,excluded.
inline std::string noise_eval_csv(const std::vector<NoiseEvalRow>& rows) {
  std::string out = csv::row({"sigma", "s", "b", "mse", "excluded"});
  for (const auto& r : rows) {
    out += csv::row({format_number(r.sigma), format_number(r.s), format_number(r.b),
                     format_number(r.mse), std::to_string(r.excluded)});
  }
  return out;
}

}  // namespace aexp
