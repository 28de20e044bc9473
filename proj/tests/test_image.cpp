#include "sticker/image.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace sticker;
namespace fs = std::filesystem;

namespace {

Image gradient(int c, int h, int w) {
  Image img(c, h, w);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) img.at(k, y, x) = static_cast<float>((x + y * w + k * 7) % 256) / 255.0f;
    }
  }
  return img;
}

}  // namespace

TEST(Image, PngRoundTripIsExactForQuantizedPixels) {
  const auto dir = fs::temp_directory_path() / "sticker_image_test";
  fs::create_directories(dir);
  const Image img = quantize_u8(gradient(3, 9, 7));
  write_png(dir / "a.png", img);
  const Image back = read_image(dir / "a.png");
  ASSERT_EQ(back.channels, 3);
  ASSERT_EQ(back.height, 9);
  ASSERT_EQ(back.width, 7);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-7);
}

TEST(Image, UnreadableFileThrows) {
  const auto path = fs::temp_directory_path() / "sticker_image_test_bad.png";
  std::ofstream(path) << "not an image";
  EXPECT_THROW(read_image(path), ImageError);
  EXPECT_THROW(read_image(fs::temp_directory_path() / "does_not_exist.png"), ImageError);
}

TEST(Image, ResizeToSameSizeIsIdentity) {
  const Image img = gradient(3, 8, 8);
  const Image same = resize_bilinear(img, 8, 8);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(same.data[i], img.data[i], 1e-6);
}

TEST(Image, ResizeConstantStaysConstant) {
  const Image img(3, 5, 9, 0.25f);
  const Image out = resize_bilinear(img, 12, 4);
  EXPECT_EQ(out.height, 12);
  EXPECT_EQ(out.width, 4);
  for (float v : out.data) EXPECT_NEAR(v, 0.25f, 1e-6);
}
