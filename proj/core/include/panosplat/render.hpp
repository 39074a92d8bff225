#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "panosplat/camera.hpp"
#include "panosplat/cloud.hpp"
#include "panosplat/image.hpp"

namespace panosplat {

/// Per-frame residual pose correction; composes on the left of the base pose.
struct ResidualPose {
  Eigen::Vector4d q = Eigen::Vector4d(1, 0, 0, 0);  // w-x-y-z
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Pose as_pose() const { return {quat_to_rot(q), t}; }
  bool is_identity() const {
    return q == Eigen::Vector4d(1, 0, 0, 0) && t == Eigen::Vector3d::Zero();
  }
};

/// Per-view channel-wise tone correction applied to the rendered color.
struct ToneParams {
  Eigen::Vector3d w = Eigen::Vector3d::Ones();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
};

struct PerGaussianStats {
  std::vector<double> max_radius_px;
  std::vector<uint8_t> visible;
  std::vector<int> pixel_count;
};

struct RenderOutput {
  Image color;   // H x W x 3; tone applied, unclamped
  Image depth;   // H x W, alpha-blended camera z
  Image normal;  // H x W x 3, alpha-blended world normals (not renormalized)
  Image alpha;   // H x W, 1 - final transmittance
  PerGaussianStats stats;
};

/// Blending constants (3DGS community conventions).
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kTransmittanceEps = 1e-4;
inline constexpr double kCovDilation = 0.3;
inline constexpr double kNearClip = 0.05;
inline constexpr double kExtent99 = 3.0348;  // sqrt(chi2_2df at 99%)
inline constexpr int kTileSize = 16;

/// Screen-space projection of one Gaussian (EWA local affine approximation).
struct ProjectedGaussian {
  Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d conic = Eigen::Matrix2d::Zero();
  Eigen::Vector3d x_cam = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // evaluated SH color
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();    // unit viewing direction
  double dir_range = 0;                             // |mu - camera center|
  Eigen::Vector3d normal_w = Eigen::Vector3d::Zero();
  int min_axis = 2;
  double normal_sign = 1.0;
  double opacity = 0;  // sigmoid of the logit
  double depth = 0;
  double radius_px = 0;
  bool culled = true;
};

struct PixelContribution {
  int32_t gaussian;  // cloud index
  double alpha;
};

/// Forward cache consumed by backward(); holds everything needed to replay
/// the blend exactly.
struct RenderCache {
  std::vector<ProjectedGaussian> proj;  // indexed by cloud index
  std::vector<int32_t> order;           // sorted non-culled cloud indices
  std::vector<std::vector<int32_t>> tile_lists;
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<PixelContribution>> pixel_contribs;  // per pixel
  Image pre_tone_color;
  Pose base_pose;
  ResidualPose residual;
  bool has_residual = false;
  ToneParams tone;
  bool has_tone = false;
  Pose adjusted_pose;
  Intrinsics K;
  int h = 0, w = 0;
  bool valid = false;
};

struct Gradients {
  std::vector<Eigen::Vector3d> d_mu;
  std::vector<Eigen::Vector4d> d_rot;
  std::vector<Eigen::Vector3d> d_log_scale;
  std::vector<double> d_opacity_logit;
  std::vector<Eigen::Vector3d> d_sh_dc;
  std::vector<Eigen::Matrix3d> d_sh_rest;
  /// Accumulated per-pixel absolute screen-space positional gradient.
  std::vector<double> abs_grad;
  Eigen::Vector4d d_res_q = Eigen::Vector4d::Zero();
  Eigen::Vector3d d_res_t = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_tone_w = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_tone_b = Eigen::Vector3d::Zero();

  void resize(size_t n);
};

/// EWA projection of a single Gaussian.
ProjectedGaussian project_gaussian(const Eigen::Vector3d& mu,
                                   const Eigen::Vector4d& q,
                                   const Eigen::Vector3d& log_scale,
                                   const Pose& pose, const Intrinsics& K, int h,
                                   int w);

/// Depth-sorted front-to-back alpha blending producing color/depth/normal/
/// alpha images plus density-control statistics. Deterministic for any
/// thread count.
RenderOutput render(const GaussianCloud& cloud, const Pose& base_pose,
                    const ResidualPose* residual, const Intrinsics& K, int h,
                    int w, const ToneParams* tone = nullptr,
                    RenderCache* cache = nullptr);

/// Reverse-mode gradients of a scalar loss given its gradient images
/// (any may be empty = zero). dL_dcolor is w.r.t. the post-tone color.
/// dL_dR_adjusted optionally injects an extra gradient on the adjusted
/// rotation (used by losses that rotate rendered quantities).
Gradients backward(const GaussianCloud& cloud, const RenderCache& cache,
                   const Image& dL_dcolor, const Image& dL_ddepth,
                   const Image& dL_dnormal,
                   const Eigen::Matrix3d* dL_dR_adjusted = nullptr);

/// Cube-face render-and-stitch equirectangular panorama (2:1 aspect).
Image render_panorama(const GaussianCloud& cloud, const Eigen::Vector3d& center,
                      int face_resolution);

}  // namespace panosplat
