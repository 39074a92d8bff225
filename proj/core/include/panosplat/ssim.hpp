#pragma once

#include "panosplat/image.hpp"

namespace panosplat {

/// SSIM window parameters: 11x11 Gaussian, sigma 1.5, K1/K2 0.01/0.03,
/// valid-window (no padding), channel-averaged.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

double ssim(const Image& a, const Image& b);

struct SsimGrad {
  double value = 0;
  Image d_a;  // gradient of the SSIM value w.r.t. the first image
};

SsimGrad ssim_with_grad(const Image& a, const Image& b);

}  // namespace panosplat
