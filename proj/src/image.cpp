#include "fh/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fh {
namespace {

Image from_bgr8(const cv::Mat& mat) {
  cv::Mat bgr;
  if (mat.channels() == 1) {
    cv::Mat planes[] = {mat, mat, mat};
    cv::merge(planes, 3, bgr);
  } else if (mat.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(mat, planes);
    planes.pop_back();
    cv::merge(planes, bgr);
  } else {
    bgr = mat;
  }
  if (bgr.depth() != CV_8U) throw std::runtime_error("only 8-bit rasters are supported");
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0;
      img.at(y, x, 1) = row[x][1] / 255.0;
      img.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return img;
}

cv::Mat to_bgr8(const Image& img) {
  cv::Mat mat(img.height(), img.width(), CV_8UC3);
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (int y = 0; y < img.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      row[x] = cv::Vec3b(q(img.at(y, x, 2)), q(img.at(y, x, 1)), q(img.at(y, x, 0)));
    }
  }
  return mat;
}

}  // namespace

Image::Image(int height, int width, double fill)
    : height_(height), width_(width), pixels_(static_cast<std::size_t>(3) * height * width, fill) {
  if (height < 0 || width < 0) throw std::invalid_argument("negative image extent");
}

Tensor Image::to_tensor() const { return Tensor(Shape{1, 3, height_, width_}, pixels_); }

Image Image::from_tensor(const Tensor& t, int n) {
  const Shape s = t.shape();
  if (s.c != 3) throw std::invalid_argument("image tensor needs 3 channels, got " + s.str());
  if (n < 0 || n >= s.n) throw std::out_of_range("image index out of range");
  Image img(s.h, s.w);
  const std::size_t count = 3 * s.plane();
  std::copy_n(t.data() + static_cast<std::size_t>(n) * count, count, img.pixels_.data());
  return img;
}

bool Image::in_unit_range() const {
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
}

Image Image::clamped() const {
  Image out = *this;
  for (auto& v : out.pixels_) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return out;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("no images to stack");
  std::vector<Tensor> parts;
  parts.reserve(images.size());
  for (const auto& img : images) parts.push_back(img.to_tensor());
  return stack_batch(parts);
}

Image load_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw std::runtime_error("cannot read image " + path.string());
  return from_bgr8(mat);
}

void save_image(const Image& image, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_bgr8(image))) throw std::runtime_error("cannot write image " + path.string());
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_bgr8(image), out)) throw std::runtime_error("PNG encoding failed");
  return out;
}

Image decode_lossless(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    throw std::invalid_argument("JPEG payloads are not accepted; send a lossless raster such as PNG");
  }
  if (bytes.empty()) throw std::invalid_argument("empty image payload");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw std::invalid_argument("image payload could not be decoded");
  return from_bgr8(mat);
}

}  // namespace fh
