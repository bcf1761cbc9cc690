#pragma once

#include "fh/feature_extractor.hpp"
#include "fh/image.hpp"

namespace fh {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE) with the MSE taken over all three channels jointly.
/// Returns kPsnrCap when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean local SSIM on ITU-R BT.601 luma, 11x11 Gaussian window (sigma 1.5),
/// evaluated at every position where the window fits inside the image.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// Cosine of the angle between the extractor features of two 128x128 images.
double feature_cosine(const Image& a, const Image& b, const FeatureExtractor& extractor);

}  // namespace fh
