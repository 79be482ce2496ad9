#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <string>

#include "aexp/pnm.hpp"
#include "test_support.hpp"

using namespace aexp;

namespace {

std::string error_of(const std::string& bytes) {
  try {
    decode_pnm(bytes);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Pnm, SmallestGraymap) {
  std::string bytes = "P5 4 3 255\n";
  for (int i = 0; i < 12; ++i) bytes += static_cast<char>(i * 20);
  const Image img = decode_pnm(bytes);
  EXPECT_EQ(img.width(), 4);
  EXPECT_EQ(img.height(), 3);
  EXPECT_EQ(img.channels(), 1);
  EXPECT_EQ(img.at(3, 2), 220);
}

TEST(Pnm, HeaderCommentsAreTolerated) {
  std::string bytes = "P6\n# made by hand\n3 # width\n3\n# maxval next\n255\n";
  bytes += std::string(27, '\x7f');
  const Image img = decode_pnm(bytes);
  EXPECT_EQ(img.channels(), 3);
  EXPECT_EQ(img.at(2, 2, 2), 0x7f);
}

TEST(Pnm, RoundTripIsBitExact) {
  std::mt19937_64 rng(99);
  aexp::testing::TempDir dir("pnm");
  for (const int channels : {1, 3}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::uniform_int_distribution<int> dim(3, 31);
      const Image img = aexp::testing::random_image(dim(rng), dim(rng), channels, rng);
      const auto path = dir.path() / ("img" + std::to_string(trial) + (channels == 1 ? ".pgm" : ".ppm"));
      write_pnm(img, path);
      EXPECT_EQ(read_pnm(path), img);
      std::ifstream in(path, std::ios::binary);
      const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      EXPECT_EQ(bytes, encode_pnm(img));
    }
  }
}

TEST(Pnm, ErrorsNameTheField) {
  EXPECT_NE(error_of("P2 3 3 255\n").find("magic"), std::string::npos);
  EXPECT_NE(error_of("P6 3 3 65535\n" + std::string(54, 'a')).find("unsupported maxval"),
            std::string::npos);
  EXPECT_NE(error_of("P5 4 3 255\nabc").find("truncated"), std::string::npos);
  EXPECT_NE(error_of("P5 x 3 255\n").find("width"), std::string::npos);
  EXPECT_NE(error_of("P5 4 3 255").find("whitespace"), std::string::npos);
  EXPECT_NE(error_of("P5 2 3 255\n" + std::string(6, 'a')).find("minimum"), std::string::npos);
}

TEST(Pnm, MissingFileIsIoError) {
  EXPECT_THROW(read_pnm("/nonexistent/dir/x.pgm"), IoError);
}
