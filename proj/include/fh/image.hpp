#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fh/tensor.hpp"

namespace fh {

/// RGB raster with values in [0,1], stored channel-planar (3 x H x W).
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] bool empty() const { return pixels_.empty(); }

  double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  [[nodiscard]] double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  [[nodiscard]] std::span<double> pixels() { return pixels_; }
  [[nodiscard]] std::span<const double> pixels() const { return pixels_; }

  /// [1, 3, H, W] tensor sharing no storage with the image.
  [[nodiscard]] Tensor to_tensor() const;
  /// Sample `n` of an [N, 3, H, W] tensor.
  static Image from_tensor(const Tensor& t, int n = 0);

  /// True when every value is finite and inside [0,1].
  [[nodiscard]] bool in_unit_range() const;
  [[nodiscard]] Image clamped() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  [[nodiscard]] std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

/// Stacks images of equal size into an [N, 3, H, W] tensor.
Tensor images_to_tensor(std::span<const Image> images);

/// Reads any raster format the codec library understands; 8-bit values are divided by 255.
Image load_image(const std::filesystem::path& path);
/// Writes an 8-bit raster (format from the extension); values are clamped and rounded.
void save_image(const Image& image, const std::filesystem::path& path);

/// Lossless 8-bit PNG bytes.
std::vector<std::uint8_t> encode_png(const Image& image);
/// Decodes lossless raster bytes (PNG, BMP, PPM/PGM). JPEG payloads are rejected.
Image decode_lossless(std::span<const std::uint8_t> bytes);

}  // namespace fh
