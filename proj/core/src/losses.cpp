#include "panosplat/losses.hpp"

#include <cmath>

#include "panosplat/errors.hpp"
#include "panosplat/ssim.hpp"

namespace panosplat {

namespace {

/// Charbonnier smoothing scale for absolute-value terms; keeps every loss C2
/// so finite-difference checks are meaningful, with phi(0) = 0.
constexpr double kCharbEps = 3e-4;

inline double charb(double x) {
  return std::sqrt(x * x + kCharbEps * kCharbEps) - kCharbEps;
}
inline double charb_grad(double x) {
  return x / std::sqrt(x * x + kCharbEps * kCharbEps);
}

}  // namespace

void LossWeights::validate() const {
  if (l1 < 0 || dssim < 0 || normal < 0 || d2n < 0)
    throw ValidationError("loss_weights: all weights must be >= 0");
}

ColorLoss loss_color(const Image& rendered, const Image& target,
                     const LossWeights& w) {
  if (!rendered.same_shape(target))
    throw ValidationError("loss_color: image shapes differ");
  ColorLoss out;
  out.d_image = Image(rendered.h, rendered.w, rendered.c);
  const double inv_n = 1.0 / static_cast<double>(rendered.v.size());
  double l1 = 0;
  for (size_t i = 0; i < rendered.v.size(); ++i) {
    const double r = rendered.v[i] - target.v[i];
    l1 += charb(r);
    out.d_image.v[i] = w.l1 * charb_grad(r) * inv_n;
  }
  out.l1 = l1 * inv_n;

  if (w.dssim > 0) {
    const SsimGrad s = ssim_with_grad(rendered, target);
    out.dssim = 1.0 - s.value;
    for (size_t i = 0; i < rendered.v.size(); ++i)
      out.d_image.v[i] -= w.dssim * s.d_a.v[i];
  }
  out.value = w.l1 * out.l1 + w.dssim * out.dssim;
  return out;
}

GeometricLoss loss_geometric(const Image& rendered_normal,
                             const Image& rendered_depth,
                             const Image& prior_normal_cam,
                             const Pose& adjusted_pose, const Intrinsics& K,
                             const GaussianCloud& cloud, const LossWeights& w) {
  const int h = rendered_normal.h, wd = rendered_normal.w;
  if (!rendered_normal.same_shape(prior_normal_cam) ||
      rendered_depth.h != h || rendered_depth.w != wd)
    throw ValidationError("loss_geometric: image shapes differ");

  GeometricLoss out;
  out.d_normal = Image(h, wd, 3);
  out.d_depth = Image(h, wd, 1);
  out.d_log_scale.assign(cloud.size(), Eigen::Vector3d::Zero());
  const Eigen::Matrix3d& R = adjusted_pose.R;

  // Angular loss: rendered world normals rotated into the camera frame and
  // compared against the camera-frame priors. Smoothed norm keeps the term
  // finite where nothing was rendered.
  constexpr double eps_n = 1e-3;
  {
    double sum = 0;
    long count = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        const Eigen::Vector3d N(prior_normal_cam.at(y, x, 0),
                                prior_normal_cam.at(y, x, 1),
                                prior_normal_cam.at(y, x, 2));
        if (N.squaredNorm() < 0.25) continue;  // invalid prior
        ++count;
        const Eigen::Vector3d nw(rendered_normal.at(y, x, 0),
                                 rendered_normal.at(y, x, 1),
                                 rendered_normal.at(y, x, 2));
        const Eigen::Vector3d nc = R * nw;
        const double norm = std::sqrt(nc.squaredNorm() + eps_n * eps_n);
        sum += 1.0 - nc.dot(N) / norm;
        // d(cos)/d nc, fed back with the -1 of (1 - cos).
        const Eigen::Vector3d d_nc =
            -(N / norm - nc * (nc.dot(N) / (norm * norm * norm)));
        const Eigen::Vector3d d_nw = R.transpose() * d_nc;
        for (int ch = 0; ch < 3; ++ch) out.d_normal.at(y, x, ch) += d_nw[ch];
        out.d_R_adjusted += d_nc * nw.transpose();
      }
    if (count > 0) {
      out.cos_term = sum / count;
      const double scale = w.normal / count;
      for (auto& v : out.d_normal.v) v *= scale;
      out.d_R_adjusted *= scale;
    } else {
      out.d_R_adjusted.setZero();
    }
  }

  // Flatten loss: mean minimal scale (meters) over the cloud.
  if (!cloud.mu.empty()) {
    double sum = 0;
    const double scale = w.normal / static_cast<double>(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
      int k = 0;
      const Eigen::Vector3d& s = cloud.log_scale[i];
      if (s[1] < s[k]) k = 1;
      if (s[2] < s[k]) k = 2;
      const double e = std::exp(s[k]);
      sum += e;
      out.d_log_scale[i][k] = scale * e;
    }
    out.flat_term = sum / static_cast<double>(cloud.size());
  }

  // Normal-map smoothness: charbonnier total variation, per channel.
  {
    double sum = 0;
    const long pairs =
        3L * (static_cast<long>(h) * (wd - 1) + static_cast<long>(h - 1) * wd);
    const double scale = w.normal / static_cast<double>(pairs);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          if (x + 1 < wd) {
            const double d =
                rendered_normal.at(y, x + 1, ch) - rendered_normal.at(y, x, ch);
            sum += charb(d);
            const double g = scale * charb_grad(d);
            out.d_normal.at(y, x + 1, ch) += g;
            out.d_normal.at(y, x, ch) -= g;
          }
          if (y + 1 < h) {
            const double d =
                rendered_normal.at(y + 1, x, ch) - rendered_normal.at(y, x, ch);
            sum += charb(d);
            const double g = scale * charb_grad(d);
            out.d_normal.at(y + 1, x, ch) += g;
            out.d_normal.at(y, x, ch) -= g;
          }
        }
    out.tv_term = sum / static_cast<double>(pairs);
  }

  // Depth-to-normal consistency: pixel-step 3D gradients of the back-projected
  // rendered depth must be orthogonal to the prior normal.
  {
    auto ray = [&](int y, int x) {
      return Eigen::Vector3d((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
    };
    auto valid = [&](int y, int x) {
      const Eigen::Vector3d N(prior_normal_cam.at(y, x, 0),
                              prior_normal_cam.at(y, x, 1),
                              prior_normal_cam.at(y, x, 2));
      return N.squaredNorm() >= 0.25;
    };
    double sum = 0;
    long count = 0;
    Image d_depth_raw(h, wd, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        if (!valid(y, x)) continue;
        const Eigen::Vector3d N(prior_normal_cam.at(y, x, 0),
                                prior_normal_cam.at(y, x, 1),
                                prior_normal_cam.at(y, x, 2));
        const Eigen::Vector3d P0 = rendered_depth.at(y, x) * ray(y, x);
        for (int dir = 0; dir < 2; ++dir) {
          const int yn = y + dir, xn = x + 1 - dir;
          if (yn >= h || xn >= wd || !valid(yn, xn)) continue;
          ++count;
          const Eigen::Vector3d Pn = rendered_depth.at(yn, xn) * ray(yn, xn);
          const double t = (Pn - P0).dot(N);
          sum += charb(t);
          const double g = charb_grad(t);
          d_depth_raw.at(yn, xn) += g * ray(yn, xn).dot(N);
          d_depth_raw.at(y, x) -= g * ray(y, x).dot(N);
        }
      }
    if (count > 0) {
      out.d2n_term = sum / count;
      const double scale = w.d2n / count;
      for (size_t i = 0; i < d_depth_raw.v.size(); ++i)
        out.d_depth.v[i] = scale * d_depth_raw.v[i];
    }
  }

  out.value = w.normal * (out.cos_term + out.flat_term + out.tv_term) +
              w.d2n * out.d2n_term;
  return out;
}

}  // namespace panosplat
