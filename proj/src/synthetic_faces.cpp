#include "fh/synthetic_faces.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

namespace fh {
namespace fs = std::filesystem;

namespace {

// Colours are RGB in [0,1]; cv draws into a 3-channel double canvas in that order.
cv::Scalar rgb(double r, double g, double b) { return {r, g, b}; }

cv::Scalar jitter(const cv::Scalar& c, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  return {std::clamp(c[0] + u(rng), 0.0, 1.0), std::clamp(c[1] + u(rng), 0.0, 1.0), std::clamp(c[2] + u(rng), 0.0, 1.0)};
}

int attr(const AttributeVector& a, const char* name) { return a[attribute_index(name)] >= 0.5 ? 1 : 0; }

}  // namespace

Image render_synthetic_face(const AttributeVector& a, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(-3, 3);
  cv::Mat canvas(kSynthHeight, kSynthWidth, CV_64FC3, jitter(rgb(0.55, 0.6, 0.65), rng, 0.2));

  const int male = attr(a, "Male");
  const int young = attr(a, "Young");
  const cv::Point c(kSynthWidth / 2 + shift(rng), 118 + shift(rng));
  const cv::Size face(male ? 40 : 35, 50);

  cv::Scalar skin = attr(a, "Pale") ? rgb(0.96, 0.88, 0.84) : rgb(0.82, 0.62, 0.48);
  skin = jitter(skin, rng, 0.04);
  cv::Scalar hair = rgb(0.45, 0.45, 0.45);
  if (attr(a, "Black Hair")) hair = rgb(0.06, 0.05, 0.05);
  if (attr(a, "Brown Hair")) hair = rgb(0.42, 0.26, 0.12);
  if (attr(a, "Blond Hair")) hair = rgb(0.93, 0.82, 0.45);
  hair = jitter(hair, rng, 0.03);
  const bool bald = attr(a, "Bald");

  // Long hair falls behind the shoulders line for non-male faces.
  if (!bald && !male) cv::ellipse(canvas, c + cv::Point(0, 10), cv::Size(52, 68), 0, 180, 360 + 180, hair, cv::FILLED);
  if (!bald) cv::ellipse(canvas, c - cv::Point(0, 12), cv::Size(face.width + 7, face.height), 0, 180, 360, hair, cv::FILLED);
  cv::ellipse(canvas, c, face, 0, 0, 360, skin, cv::FILLED);
  if (bald) cv::ellipse(canvas, c - cv::Point(0, 30), cv::Size(face.width - 10, 14), 0, 180, 360, skin * 1.08, cv::FILLED);

  if (attr(a, "Bangs") && !bald) {
    cv::ellipse(canvas, c - cv::Point(0, 30), cv::Size(face.width - 2, 20), 0, 180, 360, hair, cv::FILLED);
    cv::rectangle(canvas, c + cv::Point(-face.width + 6, -32), c + cv::Point(face.width - 6, -22), hair, cv::FILLED);
  }
  if (!young) {
    for (int i = 0; i < 3; ++i) {
      const int y = c.y - 36 + 5 * i;
      if (!attr(a, "Bangs")) cv::line(canvas, {c.x - 16, y}, {c.x + 16, y}, skin * 0.75, 1);
    }
    cv::line(canvas, c + cv::Point(-24, 12), c + cv::Point(-18, 24), skin * 0.75, 1);
    cv::line(canvas, c + cv::Point(24, 12), c + cv::Point(18, 24), skin * 0.75, 1);
  }

  const cv::Point le = c + cv::Point(-15, -8);
  const cv::Point re = c + cv::Point(15, -8);
  const cv::Scalar brow = bald ? rgb(0.2, 0.15, 0.1) : hair * 0.8;
  const int brow_thick = attr(a, "Bushy Eyebrows") ? 5 : 2;
  cv::line(canvas, le + cv::Point(-8, -10), le + cv::Point(8, -11), brow, brow_thick);
  cv::line(canvas, re + cv::Point(-8, -11), re + cv::Point(8, -10), brow, brow_thick);
  for (const auto& e : {le, re}) {
    cv::ellipse(canvas, e, cv::Size(7, 4), 0, 0, 360, rgb(0.98, 0.98, 0.98), cv::FILLED);
    cv::circle(canvas, e, 3, jitter(rgb(0.25, 0.2, 0.15), rng, 0.05), cv::FILLED);
  }
  if (attr(a, "Eyeglasses")) {
    for (const auto& e : {le, re}) cv::circle(canvas, e, 11, rgb(0.05, 0.05, 0.08), 3);
    cv::line(canvas, le + cv::Point(11, 0), re - cv::Point(11, 0), rgb(0.05, 0.05, 0.08), 2);
  }

  cv::line(canvas, c + cv::Point(0, -2), c + cv::Point(-3, 12), skin * 0.7, 2);
  const cv::Point mouth = c + cv::Point(0, 27);
  if (attr(a, "Mustache")) {
    cv::ellipse(canvas, mouth - cv::Point(0, 8), cv::Size(15, 4), 0, 0, 360, hair * 0.7, cv::FILLED);
  }
  if (attr(a, "Mouth Open")) {
    cv::ellipse(canvas, mouth, cv::Size(11, 7), 0, 0, 360, rgb(0.35, 0.05, 0.08), cv::FILLED);
    cv::ellipse(canvas, mouth - cv::Point(0, 3), cv::Size(8, 2), 0, 0, 360, rgb(0.95, 0.95, 0.92), cv::FILLED);
  } else {
    cv::ellipse(canvas, mouth, cv::Size(11, 3), 0, 0, 180, rgb(0.65, 0.25, 0.25), 3);
  }
  if (male) cv::ellipse(canvas, c + cv::Point(0, 38), cv::Size(26, 10), 0, 0, 180, skin * 0.88, 2);

  // Soft lighting gradient and sensor noise.
  std::normal_distribution<double> noise(0.0, 0.015);
  const double tilt = std::uniform_real_distribution<double>(-0.08, 0.08)(rng);
  Image img(kSynthHeight, kSynthWidth);
  for (int y = 0; y < kSynthHeight; ++y) {
    const auto* row = canvas.ptr<cv::Vec3d>(y);
    for (int x = 0; x < kSynthWidth; ++x) {
      const double light = 1.0 + tilt * (x - kSynthWidth / 2) / kSynthWidth;
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = std::clamp(row[x][ch] * light + noise(rng), 0.0, 1.0);
    }
  }
  return img;
}

AttributeVector sample_face_attributes(std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution rare(0.2);
  AttributeVector a;
  a[attribute_index("Male")] = coin(rng);
  a[attribute_index("Young")] = coin(rng);
  a[attribute_index("Bald")] = a[attribute_index("Male")] > 0 && rare(rng);
  if (a[attribute_index("Bald")] == 0.0) {
    const int colour = std::uniform_int_distribution<int>(0, 3)(rng);
    if (colour == 0) a[attribute_index("Black Hair")] = 1;
    if (colour == 1) a[attribute_index("Blond Hair")] = 1;
    if (colour == 2) a[attribute_index("Brown Hair")] = 1;
    a[attribute_index("Bangs")] = coin(rng);
  }
  a[attribute_index("Bushy Eyebrows")] = coin(rng);
  a[attribute_index("Eyeglasses")] = rare(rng);
  a[attribute_index("Mouth Open")] = coin(rng);
  a[attribute_index("Mustache")] = a[attribute_index("Male")] > 0 && coin(rng);
  a[attribute_index("Pale")] = rare(rng);
  return a;
}

fs::path write_synthetic_corpus(const fs::path& dir, int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  // CelebA column names, including two the schema does not use.
  const std::vector<std::string> columns = {"Attractive",     "Bald",      "Bangs",           "Black_Hair",
                                            "Blond_Hair",     "Brown_Hair", "Bushy_Eyebrows", "Eyeglasses",
                                            "Male",           "Mouth_Slightly_Open", "Mustache", "Pale_Skin",
                                            "Smiling",        "Young"};
  const fs::path attr_file = dir / "list_attr_celeba.txt";
  std::ofstream out(attr_file);
  out << count << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? " " : "") << columns[i];
  out << '\n';
  for (int i = 0; i < count; ++i) {
    const AttributeVector a = sample_face_attributes(rng);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", i + 1);
    save_image(render_synthetic_face(a, rng()), dir / name);
    out << name;
    for (const auto& col : columns) {
      int v;
      if (col == "Mouth_Slightly_Open") {
        v = attr(a, "Mouth Open");
      } else if (col == "Pale_Skin") {
        v = attr(a, "Pale");
      } else if (col == "Attractive" || col == "Smiling") {
        v = static_cast<int>(rng() >> 63);
      } else {
        std::string schema = col;
        std::replace(schema.begin(), schema.end(), '_', ' ');
        v = attr(a, schema.c_str());
      }
      out << ' ' << (v ? " 1" : "-1");
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + attr_file.string());
  return attr_file;
}

}  // namespace fh
