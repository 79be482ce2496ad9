// Synthetic linear sensor used to close the control loop without hardware.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aexp/controller.hpp"
#include "aexp/image.hpp"
#include "aexp/random.hpp"

namespace aexp {

/// Relative linear scene radiance, one value per pixel.
class Scene {
 public:
  Scene(int width, int height, std::vector<double> radiance)
      : width_(width), height_(height), radiance_(std::move(radiance)) {
    if (width < 3 || height < 3) throw DimensionError("scene must be at least 3x3");
    if (radiance_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw DimensionError("scene radiance length does not match its dimensions");
    }
    for (const double r : radiance_) {
      if (!std::isfinite(r) || r < 0) {
        throw std::invalid_argument("scene radiance must be finite and non-negative");
      }
    }
  }

  /// Radiance = scale * gray / 255 for each pixel of a gray image.
  static Scene from_image(const Image& img, double scale = 1.0) {
    const Image gray = to_grayscale(img);
    std::vector<double> r(gray.pixel_count());
    const auto px = gray.data();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = scale * px[i] / 255.0;
    return Scene(gray.width(), gray.height(), std::move(r));
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] const std::vector<double>& radiance() const noexcept { return radiance_; }

 private:
  int width_;
  int height_;
  std::vector<double> radiance_;
};

struct SyntheticCameraModel {
  double full_well = 100.0;          // radiance * ms * linear gain that maps to 255
  double read_noise_sigma = 1.0;     // intensity units at 0 dB
  double noise_gain_exponent = 1.0;  // noise sigma scales with A^exponent
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(full_well > 0)) throw std::invalid_argument("full_well must be > 0");
    if (!(read_noise_sigma >= 0)) throw std::invalid_argument("read_noise_sigma must be >= 0");
  }
};

inline double linear_gain(double gain_db) { return std::pow(10.0, gain_db / 20.0); }

/// Noise-free signal in intensity units before quantization and clipping.
inline double ideal_intensity(double radiance, const SyntheticCameraModel& model,
                              const ExposureParams& params) {
  return 255.0 * radiance * params.exposure_ms * linear_gain(params.gain_db) / model.full_well;
}

/// One frame: clamp(round(signal + n)), n ~ N(0, (sigma_read * A^k)^2), with
/// the noise stream seeded from (rng_seed, params).
inline Image synthetic_capture(const Scene& scene, const SyntheticCameraModel& model,
                               const ExposureParams& params) {
  if (!std::isfinite(params.exposure_ms) || !std::isfinite(params.gain_db) ||
      !(params.exposure_ms > 0)) {
    throw std::invalid_argument("synthetic_capture: exposure must be finite and positive");
  }
  model.validate();
  const double a = linear_gain(params.gain_db);
  const double scale = 255.0 * params.exposure_ms * a / model.full_well;
  const double noise_sd = model.read_noise_sigma * std::pow(a, model.noise_gain_exponent);
  std::mt19937_64 rng(
      derive_seed({model.rng_seed, bits_of(params.exposure_ms), bits_of(params.gain_db)}));
  std::normal_distribution<double> noise(0.0, noise_sd > 0 ? noise_sd : 1.0);

  std::vector<std::uint8_t> out(scene.radiance().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = scene.radiance()[i] * scale;
    if (noise_sd > 0) v += noise(rng);
    out[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  return Image(scene.width(), scene.height(), 1, std::move(out));
}

/// FrameSource over a fixed scene.
class SyntheticCamera {
 public:
  SyntheticCamera(Scene scene, SyntheticCameraModel model)
      : scene_(std::move(scene)), model_(model) {
    model_.validate();
  }

  [[nodiscard]] Image capture(const ExposureParams& params) const {
    return synthetic_capture(scene_, model_, params);
  }

  [[nodiscard]] const Scene& scene() const noexcept { return scene_; }
  [[nodiscard]] const SyntheticCameraModel& model() const noexcept { return model_; }

 private:
  Scene scene_;
  SyntheticCameraModel model_;
};

}  // namespace aexp
