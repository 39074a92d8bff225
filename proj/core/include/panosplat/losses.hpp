#pragma once

#include <Eigen/Dense>
#include <vector>

#include "panosplat/camera.hpp"
#include "panosplat/cloud.hpp"
#include "panosplat/image.hpp"

namespace panosplat {

struct LossWeights {
  double l1 = 0.8;
  double dssim = 0.2;
  double normal = 0.05;  // joint weight on cos + flatten + smoothness
  double d2n = 0.2;

  void validate() const;
};

struct ColorLoss {
  double value = 0;
  double l1 = 0;
  double dssim = 0;
  Image d_image;  // gradient w.r.t. the rendered (toned) image
};

/// Weighted L1 + (1 - SSIM) photometric loss.
ColorLoss loss_color(const Image& rendered, const Image& target,
                     const LossWeights& w);

struct GeometricLoss {
  double value = 0;
  double cos_term = 0;   // mean 1 - cos(N_hat, N), prior-valid pixels
  double flat_term = 0;  // mean minimal Gaussian scale (meters)
  double tv_term = 0;    // total variation of the rendered normal map
  double d2n_term = 0;   // depth-to-normal consistency
  Image d_normal;        // gradient w.r.t. the rendered world-normal image
  Image d_depth;         // gradient w.r.t. the rendered depth image
  std::vector<Eigen::Vector3d> d_log_scale;  // flatten-term per-Gaussian grad
  /// Pose path of the cos term (rendered normals rotated into the camera
  /// frame of the adjusted pose); feed to backward() as dL_dR_adjusted.
  Eigen::Matrix3d d_R_adjusted = Eigen::Matrix3d::Zero();
};

/// Geometric regularizer: angular normal loss against camera-frame priors,
/// flatten loss on minimal scales, normal-map smoothness, and depth-to-normal
/// consistency of the back-projected rendered depth.
GeometricLoss loss_geometric(const Image& rendered_normal,
                             const Image& rendered_depth,
                             const Image& prior_normal_cam,
                             const Pose& adjusted_pose, const Intrinsics& K,
                             const GaussianCloud& cloud, const LossWeights& w);

}  // namespace panosplat
