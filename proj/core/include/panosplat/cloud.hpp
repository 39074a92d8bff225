#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "panosplat/scaffold.hpp"
#include "panosplat/scene_gen.hpp"

namespace panosplat {

/// Structure-of-arrays Gaussian primitive set. Scales live in the log domain,
/// opacity pre-sigmoid; quaternions are w-x-y-z and kept unit-length.
struct GaussianCloud {
  std::vector<Eigen::Vector3d> mu;
  std::vector<Eigen::Vector4d> rot;        // unit quaternion
  std::vector<Eigen::Vector3d> log_scale;  // log-meters
  std::vector<double> opacity_logit;
  std::vector<Eigen::Vector3d> sh_dc;
  /// Degree-1 SH: rows are the 3 linear basis coefficients, columns RGB.
  std::vector<Eigen::Matrix3d> sh_rest;

  size_t size() const { return mu.size(); }
  void resize(size_t n);
  void erase_indices(const std::vector<size_t>& sorted_indices);
  void append(const GaussianCloud& other);
  bool finite() const;
  uint64_t checksum() const;
};

/// SH basis constants (3DGS community conventions).
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;

double sigmoid(double x);
double logit(double p);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Eigen::Matrix3d covariance_from_qs(const Eigen::Vector4d& q,
                                   const Eigen::Vector3d& log_scale);

/// Per-point mean Euclidean distance to the k nearest neighbors. Grid
/// accelerated; exact (equals brute force).
std::vector<double> knn_mean_distance(const std::vector<Eigen::Vector3d>& points,
                                      int k);

/// Flattened Gaussians on the scaffold: minimal axis along the point normal,
/// base scale from kNN mean distance, DC color from the nearest training view
/// when frames are given.
GaussianCloud init_from_scaffold(const PlaneScaffold& scaffold, int k,
                                 double flatten_eps,
                                 const std::vector<CaptureFrame>* frames = nullptr);

/// Checkpoint PLY with 3DGS-community field names (x,y,z, f_dc_*, f_rest_*,
/// opacity, scale_*, rot_*), float64 little-endian properties.
void save_cloud_ply(const std::filesystem::path& path, const GaussianCloud& cloud);
GaussianCloud load_cloud_ply(const std::filesystem::path& path);

}  // namespace panosplat
