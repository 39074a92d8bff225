#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "panosplat/camera.hpp"
#include "panosplat/image.hpp"

namespace panosplat {

/// Procedural albedo on a rectangle, parameterized by (u, v) in meters.
struct TextureDesc {
  enum class Kind { Constant, Checker, Stripes };
  Kind kind = Kind::Constant;
  Eigen::Vector3d color_a = Eigen::Vector3d(0.5, 0.5, 0.5);
  Eigen::Vector3d color_b = Eigen::Vector3d(0.5, 0.5, 0.5);
  double scale = 0.5;  // period in meters

  Eigen::Vector3d sample(double u, double v) const;
};

/// Textured rectangle: corner + a*e1 + b*e2 for (a,b) in [0,1]^2.
struct RectPlane {
  Eigen::Vector3d corner = Eigen::Vector3d::Zero();
  Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();
  TextureDesc albedo;
};

/// Axis-aligned box with per-face constant albedo (-x,+x,-y,+y,-z,+z).
struct BoxPrim {
  Eigen::Vector3d pmin = Eigen::Vector3d::Zero();
  Eigen::Vector3d pmax = Eigen::Vector3d::Ones();
  std::array<Eigen::Vector3d, 6> face_albedo;
};

struct LightSpec {
  Eigen::Vector3d ambient = Eigen::Vector3d(0.3, 0.3, 0.3);
  Eigen::Vector3d direction = Eigen::Vector3d(0, 0, 1);  // unit, toward the light
  Eigen::Vector3d intensity = Eigen::Vector3d(0.7, 0.7, 0.7);
};

struct SceneSpec {
  std::vector<RectPlane> planes;
  std::vector<BoxPrim> boxes;
  LightSpec light;

  void validate() const;
  /// Global primitive id for a box face (planes come first).
  int box_face_id(int box, int face) const {
    return static_cast<int>(planes.size()) + box * 6 + face;
  }
};

struct TrajectorySpec {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double arm_radius = 0.20;
  double yaw_range = 2.0 * M_PI;
  std::vector<double> pitch_rows = {-0.35, 0.0, 0.35};
  int frames_per_row = 8;

  void validate() const;
  int frame_count() const {
    return static_cast<int>(pitch_rows.size()) * frames_per_row;
  }
};

struct NoiseSpec {
  // Pose drift: per-frame random-walk stds.
  double rot_drift_std = 0.0;    // radians per frame
  double trans_drift_std = 0.0;  // meters per frame
  // Per-view exposure: channel-wise gain in [gain_min,gain_max], bias likewise.
  double gain_min = 1.0, gain_max = 1.0;
  double bias_min = 0.0, bias_max = 0.0;
  // Per-view depth affine corruption D' = (D - shift)/scale.
  double depth_scale_min = 1.0, depth_scale_max = 1.0;
  double depth_shift_min = 0.0, depth_shift_max = 0.0;
  // Optional per-plane multiplicative/additive jitter on top of the view affine.
  double plane_scale_jitter = 0.0;
  double plane_shift_jitter = 0.0;
  // Per-pixel angular noise on prior normals.
  double normal_noise_std = 0.0;  // radians

  void validate() const;
  bool is_zero() const;
};

struct CaptureFrame {
  Image image;   // H x W x 3, [0,1]
  Image depth;   // H x W, meters; 0 where invalid
  Image normal;  // H x W x 3, unit camera-frame vectors; 0 where invalid
  Pose pose;     // world -> camera
  Intrinsics K;
  /// Ground-truth primitive id per pixel (-1 invalid). In-memory only,
  /// not part of the serialized bundle format.
  Image prim_id;
};

/// Corruption actually applied to one view; retained so tests can check
/// planted-parameter recovery.
struct AppliedViewNoise {
  Eigen::Vector3d gain = Eigen::Vector3d::Ones();
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  double depth_scale = 1.0;
  double depth_shift = 0.0;
  std::vector<double> plane_scale;  // indexed by primitive id
  std::vector<double> plane_shift;
};

struct CaptureBundle {
  std::vector<CaptureFrame> frames;     // corrupted variant
  std::vector<CaptureFrame> gt_frames;  // uncorrupted, true poses
  std::vector<AppliedViewNoise> applied;
  SceneSpec scene;
  TrajectorySpec trajectory;
  NoiseSpec noise;
  uint64_t seed = 0;
  int width = 0, height = 0;
};

/// Poses on the sphere of radius arm_radius about center, optical axes
/// pointing outward, ordered row-major by (pitch, yaw).
std::vector<Pose> sample_trajectory(const TrajectorySpec& spec);

/// Analytic ray cast of the scene. Depth is camera-frame z; normals are
/// camera-frame, oriented toward the camera; misses get depth 0, black color.
CaptureFrame render_ground_truth(const SceneSpec& scene, const Pose& pose,
                                 const Intrinsics& K, int height, int width);

/// Applies pose drift, exposure, inverse-affine depth corruption, and normal
/// noise. Deterministic given seed.
CaptureBundle corrupt_bundle(const std::vector<CaptureFrame>& gt_frames,
                             const NoiseSpec& noise, uint64_t seed);

/// Default intrinsics: square pixels, ~70 deg horizontal FOV.
Intrinsics default_intrinsics(int height, int width);

/// Canonical test scene: a 4m box room shell with a couple of boxes inside.
SceneSpec box_room_scene(bool with_boxes = true);

}  // namespace panosplat
