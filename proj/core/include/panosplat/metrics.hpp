#pragma once

#include <string>
#include <vector>

#include "panosplat/cloud.hpp"
#include "panosplat/image.hpp"
#include "panosplat/render.hpp"
#include "panosplat/scene_gen.hpp"

namespace panosplat {

/// PSNR sentinel for bitwise-identical images (documented cap).
inline constexpr double kPsnrSentinel = 99.0;

double psnr(const Image& a, const Image& b);

struct EvalReport {
  std::string tag;
  std::vector<double> per_view_psnr;
  std::vector<double> per_view_ssim;
  double mean_psnr = 0;
  double mean_ssim = 0;
  size_t gaussian_count = 0;
  double runtime_sec = 0;

  std::string to_json() const;
  std::string to_table() const;
};

/// Renders each test view with its refined residual pose and tone parameters
/// and scores it against the ground-truth image.
EvalReport evaluate(const GaussianCloud& cloud,
                    const std::vector<CaptureFrame>& test_frames,
                    const std::vector<ResidualPose>& residuals,
                    const std::vector<ToneParams>& tones,
                    const std::string& tag = "");

}  // namespace panosplat
