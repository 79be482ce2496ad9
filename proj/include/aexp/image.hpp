// 8-bit raster container and the low-level image operators shared by the
// quality metric: luma conversion, central-difference gradients and the 3x3
// valid-region convolution.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aexp {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Row-major, channel-interleaved 8-bit image with 1 or 3 channels.
class Image {
 public:
  Image() = default;

  Image(int width, int height, int channels, std::uint8_t fill = 0)
      : Image(width, height, channels,
              std::vector<std::uint8_t>(checked_size(width, height, channels), fill)) {}

  Image(int width, int height, int channels, std::vector<std::uint8_t> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height, channels)) {
      throw DimensionError("image data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(width) + "x" +
                           std::to_string(height) + "x" + std::to_string(channels));
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] std::span<const std::uint8_t> data() const noexcept { return data_; }
  [[nodiscard]] std::span<std::uint8_t> data() noexcept { return data_; }

  [[nodiscard]] std::uint8_t at(int x, int y, int c = 0) const {
    return data_[index(x, y, c)];
  }
  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

  /// Copies one channel out as a single-channel image.
  [[nodiscard]] Image channel(int c) const {
    if (c < 0 || c >= channels_) throw std::out_of_range("channel index out of range");
    if (channels_ == 1) return *this;
    std::vector<std::uint8_t> out(pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i * channels_ + c];
    return Image(width_, height_, 1, std::move(out));
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static std::size_t checked_size(int width, int height, int channels) {
    if (channels != 1 && channels != 3) {
      throw DimensionError("channels must be 1 or 3, got " + std::to_string(channels));
    }
    if (width < 3 || height < 3) {
      throw DimensionError("image must be at least 3x3, got " + std::to_string(width) +
                           "x" + std::to_string(height));
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(channels);
  }

  [[nodiscard]] std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Dense row-major field of reals.
template <typename T>
struct Field {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  [[nodiscard]] T at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

/// Per-pixel gradient magnitudes normalized to [0, 1].
using GradientField = Field<double>;
using RealField = Field<double>;

using Kernel3x3 = std::array<std::array<double, 3>, 3>;

/// Laplacian-difference kernel that annihilates constant and planar intensity.
inline constexpr Kernel3x3 kNoiseKernel{{{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}}};

/// Largest central-difference magnitude: |(255 - 0) / 2| on both axes.
inline constexpr double kGradientNorm = 255.0 * 1.41421356237309504880;

inline void require_gray(const Image& img, const char* what) {
  if (img.channels() != 1) {
    throw DimensionError(std::string(what) + " requires a single-channel image");
  }
}

/// BT.601 luma. Single-channel input is returned unchanged.
inline Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  const auto src = img.data();
  std::vector<std::uint8_t> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::lround(y));
  }
  return Image(img.width(), img.height(), 1, std::move(out));
}

namespace detail {

/// Calls fn(index, dx, dy) for every pixel, where dx and dy are the doubled
/// central differences I(x+1) - I(x-1) with replicated borders.
template <typename Fn>
void for_each_difference(const Image& img, Fn&& fn) {
  const int w = img.width();
  const int h = img.height();
  const auto px = img.data();
  const auto row = [&](int y) { return px.data() + static_cast<std::size_t>(y) * w; };
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* up = row(y > 0 ? y - 1 : 0);
    const std::uint8_t* mid = row(y);
    const std::uint8_t* down = row(y + 1 < h ? y + 1 : h - 1);
    const std::size_t base = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int left = x > 0 ? x - 1 : 0;
      const int right = x + 1 < w ? x + 1 : w - 1;
      const int dx = static_cast<int>(mid[right]) - static_cast<int>(mid[left]);
      const int dy = static_cast<int>(down[x]) - static_cast<int>(up[x]);
      fn(base + static_cast<std::size_t>(x), dx, dy);
    }
  }
}

}  // namespace detail

/// Central-difference gradient magnitude, sqrt(gx^2 + gy^2) / (255 * sqrt 2).
inline GradientField gradient_magnitude(const Image& img) {
  require_gray(img, "gradient_magnitude");
  GradientField field{img.width(), img.height(), std::vector<double>(img.pixel_count())};
  detail::for_each_difference(img, [&](std::size_t i, int dx, int dy) {
    const double sq = static_cast<double>(dx * dx + dy * dy);
    field.values[i] = std::min(1.0, 0.5 * std::sqrt(sq) / kGradientNorm);
  });
  return field;
}

/// Valid-region 3x3 correlation over a real-valued field. Output is
/// (w-2) x (h-2); entry (x, y) corresponds to input pixel (x+1, y+1).
inline RealField convolve3x3(const RealField& in, const Kernel3x3& kernel) {
  if (in.width < 3 || in.height < 3) {
    throw DimensionError("convolve3x3 requires at least 3x3 input, got " +
                         std::to_string(in.width) + "x" + std::to_string(in.height));
  }
  RealField out{in.width - 2, in.height - 2, {}};
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 1; y < in.height - 1; ++y) {
    for (int x = 1; x < in.width - 1; ++x) {
      double acc = 0.0;
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          acc += kernel[ky + 1][kx + 1] * in.at(x + kx, y + ky);
        }
      }
      out.values[static_cast<std::size_t>(y - 1) * out.width + (x - 1)] = acc;
    }
  }
  return out;
}

inline RealField to_real(const Image& img) {
  require_gray(img, "to_real");
  RealField f{img.width(), img.height(), std::vector<double>(img.pixel_count())};
  const auto px = img.data();
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = px[i];
  return f;
}

inline RealField convolve3x3(const Image& img, const Kernel3x3& kernel) {
  return convolve3x3(to_real(img), kernel);
}

/// Mean over all samples of all channels.
inline double mean_intensity(const Image& img) {
  const auto px = img.data();
  if (px.empty()) return 0.0;
  std::uint64_t sum = 0;
  for (const auto v : px) sum += v;
  return static_cast<double>(sum) / static_cast<double>(px.size());
}

}  // namespace aexp
