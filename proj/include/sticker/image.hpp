#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sticker {

/// Planar C x H x W image with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool empty() const { return data.empty(); }
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes PNG or JPEG (sniffed from the file header) into an RGB image.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Pixels are quantized with round-to-nearest.
void write_png(const std::filesystem::path& path, const Image& image);

/// Encodes an 8-bit RGB PNG into memory.
std::vector<std::uint8_t> encode_png(const Image& image);

/// Bilinear resampling with half-pixel centers (edge-clamped).
Image resize_bilinear(const Image& image, int height, int width);

/// Round-trips pixels through 8-bit quantization, as a PNG write/read would.
Image quantize_u8(const Image& image);

}  // namespace sticker
