// Binary netpbm I/O: P5 (graymap) and P6 (pixmap) with maxval 255.
#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aexp/image.hpp"

namespace aexp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(const std::string& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string("pnm: ") + field + " too large");
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("pnm: missing or malformed ") + field);
    return value;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw ParseError("pnm: missing whitespace after maxval");
    }
    ++pos_;
  }

  [[nodiscard]] std::size_t position() const noexcept { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 2;
};

}  // namespace detail

inline Image decode_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("pnm: bad magic number (expected P5 or P6)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  detail::PnmHeaderReader reader(bytes);
  const long width = reader.read_uint("width");
  const long height = reader.read_uint("height");
  const long maxval = reader.read_uint("maxval");
  if (maxval != 255) throw ParseError("pnm: unsupported maxval " + std::to_string(maxval));
  reader.expect_single_space();
  if (width < 3 || height < 3) {
    throw ParseError("pnm: dimensions " + std::to_string(width) + "x" +
                     std::to_string(height) + " below the 3x3 minimum");
  }
  const std::size_t expected = static_cast<std::size_t>(width) *
                               static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(channels);
  const std::size_t available = bytes.size() - reader.position();
  if (available < expected) {
    throw ParseError("pnm: truncated payload (expected " + std::to_string(expected) +
                     " bytes, found " + std::to_string(available) + ")");
  }
  const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(reader.position());
  std::vector<std::uint8_t> data(first, first + static_cast<std::ptrdiff_t>(expected));
  return Image(static_cast<int>(width), static_cast<int>(height), channels, std::move(data));
}

inline std::string encode_pnm(const Image& img) {
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) +
                    " " + std::to_string(img.height()) + "\n255\n";
  const auto px = img.data();
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

inline Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_pnm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  const std::string bytes = encode_pnm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace aexp
