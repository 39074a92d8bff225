#include "panosplat/metrics.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "panosplat/errors.hpp"
#include "panosplat/ssim.hpp"

namespace panosplat {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ValidationError("psnr: image shapes differ");
  double mse = 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.v.size());
  if (mse == 0.0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, 10.0 * std::log10(1.0 / mse));
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["tag"] = tag;
  j["per_view_psnr"] = per_view_psnr;
  j["per_view_ssim"] = per_view_ssim;
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  j["gaussian_count"] = gaussian_count;
  j["runtime_sec"] = runtime_sec;
  j["lpips"] = nullptr;  // not computed (needs a pretrained network)
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::setw(8) << "view" << std::setw(12) << "psnr_db" << std::setw(12)
     << "ssim" << "\n";
  for (size_t i = 0; i < per_view_psnr.size(); ++i)
    os << std::setw(8) << i << std::setw(12) << per_view_psnr[i]
       << std::setw(12) << per_view_ssim[i] << "\n";
  os << std::setw(8) << "mean" << std::setw(12) << mean_psnr << std::setw(12)
     << mean_ssim << "\n";
  os << "gaussians: " << gaussian_count << "  tag: " << (tag.empty() ? "-" : tag)
     << "\n";
  return os.str();
}

EvalReport evaluate(const GaussianCloud& cloud,
                    const std::vector<CaptureFrame>& test_frames,
                    const std::vector<ResidualPose>& residuals,
                    const std::vector<ToneParams>& tones,
                    const std::string& tag) {
  if (residuals.size() != test_frames.size() || tones.size() != test_frames.size())
    throw ValidationError("evaluate: corrections and frames length mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  rep.tag = tag;
  rep.gaussian_count = cloud.size();
  for (size_t i = 0; i < test_frames.size(); ++i) {
    const CaptureFrame& f = test_frames[i];
    RenderOutput ro = render(cloud, f.pose, &residuals[i], f.K, f.image.h,
                             f.image.w, &tones[i]);
    Image img = ro.color;
    for (auto& v : img.v) v = std::clamp(v, 0.0, 1.0);
    rep.per_view_psnr.push_back(psnr(img, f.image));
    rep.per_view_ssim.push_back(ssim(img, f.image));
  }
  double ps = 0, ss = 0;
  for (size_t i = 0; i < rep.per_view_psnr.size(); ++i) {
    ps += rep.per_view_psnr[i];
    ss += rep.per_view_ssim[i];
  }
  if (!rep.per_view_psnr.empty()) {
    rep.mean_psnr = ps / static_cast<double>(rep.per_view_psnr.size());
    rep.mean_ssim = ss / static_cast<double>(rep.per_view_ssim.size());
  }
  rep.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace panosplat
