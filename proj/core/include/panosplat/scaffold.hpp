#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "panosplat/camera.hpp"
#include "panosplat/image.hpp"
#include "panosplat/scene_gen.hpp"

namespace panosplat {

struct ScaffoldConfig {
  // Mean-shift plane segmentation.
  double bandwidth_normal_deg = 10.0;  // angular bandwidth
  double bandwidth_offset = 0.05;      // meters
  int anchor_stride = 4;               // subsample grid for anchors
  double min_plane_frac = 0.0025;      // min plane size as fraction of pixels
  // Affine depth fits.
  int min_overlap_pixels = 100;
  int fit_steps = 200;
  double fit_lr = 0.05;
  double huber_delta = 0.01;  // meters
  double overlap_rel_tol = 0.1;
  // Downsampling.
  double voxel_size = 0.02;  // meters
};

struct PlaneInfo {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // unit, camera frame
  double offset = 0.0;                                // d = n . x_cam
  int pixel_count = 0;
};

struct PlaneSegmentation {
  Image labels;  // H x W, plane id as double; -1 = unassigned/invalid
  std::vector<PlaneInfo> planes;
};

struct AffineDepthParams {
  double scale = 1.0;  // alpha
  double shift = 0.0;  // beta
  std::map<int, std::pair<double, double>> per_plane;  // id -> (gamma, delta)
};

struct PointSource {
  uint16_t frame = 0;
  uint16_t plane = 0;
};

struct PlaneScaffold {
  std::vector<Eigen::Vector3d> points;   // world frame, meters
  std::vector<Eigen::Vector3d> normals;  // world frame, unit
  std::vector<PointSource> source;

  size_t size() const { return points.size(); }
};

/// Sentinel plane id recorded for points that were not assigned to any plane.
inline constexpr uint16_t kNoPlane = 0xffff;

struct ProjectedDepth {
  Image depth;  // H x W; z-buffered smallest depth
  Image hit;   // H x W; 1 where any point landed
};

/// Projects world points into a view; per-pixel conflicts keep the smallest
/// depth.
ProjectedDepth project_points(const std::vector<Eigen::Vector3d>& points,
                              const Pose& pose, const Intrinsics& K, int height,
                              int width);

/// Back-projects masked depth pixels to world points (mask nonzero = use).
std::vector<Eigen::Vector3d> back_project(const Image& depth, const Image& mask,
                                          const Pose& pose, const Intrinsics& K);

/// Masked L1 fit of depth = scale*D + shift against projected scaffold depth.
/// Least-squares warm start, then Huber-smoothed gradient descent; the scale
/// is optimized in the log domain so it stays positive.
std::pair<double, double> fit_global_affine(const Image& depth, const Image& proj,
                                            const Image& mask,
                                            const ScaffoldConfig& cfg);

/// Mean-shift plane segmentation over (normal, plane offset) embeddings.
PlaneSegmentation segment_planes(const Image& depth, const Image& normal,
                                 const Intrinsics& K, const ScaffoldConfig& cfg);

/// Per-plane affine refinement; planes with insufficient overlap keep the
/// global parameters.
AffineDepthParams fit_plane_affine(const Image& depth, const PlaneSegmentation& seg,
                                   const std::pair<double, double>& global_params,
                                   const Image& proj, const Image& mask,
                                   const ScaffoldConfig& cfg);

/// Overlap test: scaffold projects there, depth valid, and the adjusted depth
/// is within a relative tolerance of the projected depth.
Image compute_overlap_mask(const Image& depth, const ProjectedDepth& proj,
                           const std::pair<double, double>& params,
                           const ScaffoldConfig& cfg);

/// Appends non-overlapping, plane-assigned pixels of a frame to the scaffold.
void merge_frame(PlaneScaffold& scaffold, const Image& depth,
                 const AffineDepthParams& params, const PlaneSegmentation& seg,
                 const Pose& pose, const Intrinsics& K, const Image& overlap,
                 int frame_index);

/// Full sequential global-to-local assembly over a bundle's (corrupted)
/// frames.
PlaneScaffold assemble(const std::vector<CaptureFrame>& frames,
                       const ScaffoldConfig& cfg, bool align = true);

/// Voxel-grid downsampling keeping, per occupied voxel, the point nearest the
/// voxel centroid (exact normal and source retained).
PlaneScaffold downsample_scaffold(const PlaneScaffold& scaffold, double voxel_size);

/// Binary little-endian PLY with x,y,z,nx,ny,nz,frame,plane properties.
void save_scaffold_ply(const std::filesystem::path& path, const PlaneScaffold& s);
PlaneScaffold load_scaffold_ply(const std::filesystem::path& path);

}  // namespace panosplat
