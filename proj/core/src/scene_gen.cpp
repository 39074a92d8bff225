#include "panosplat/scene_gen.hpp"

#include <cmath>
#include <limits>

#include "panosplat/errors.hpp"
#include "panosplat/rng.hpp"

namespace panosplat {

Eigen::Vector3d TextureDesc::sample(double u, double v) const {
  switch (kind) {
    case Kind::Constant:
      return color_a;
    case Kind::Checker: {
      const int iu = static_cast<int>(std::floor(u / scale));
      const int iv = static_cast<int>(std::floor(v / scale));
      return ((iu + iv) & 1) ? color_b : color_a;
    }
    case Kind::Stripes: {
      const int iu = static_cast<int>(std::floor(u / scale));
      return (iu & 1) ? color_b : color_a;
    }
  }
  return color_a;
}

void SceneSpec::validate() const {
  if (planes.size() < 4)
    throw ValidationError("scene.planes: at least 4 planes (a room shell) required");
  for (size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].e1.cross(planes[i].e2).norm() < 1e-12)
      throw ValidationError("scene.planes[" + std::to_string(i) +
                            "]: edge vectors are linearly dependent");
  }
  for (size_t i = 0; i < boxes.size(); ++i) {
    if (!(boxes[i].pmin.array() < boxes[i].pmax.array()).all())
      throw ValidationError("scene.boxes[" + std::to_string(i) +
                            "]: min corner must be < max corner componentwise");
  }
}

void TrajectorySpec::validate() const {
  if (arm_radius < 0)
    throw ValidationError("trajectory.arm_radius: must be >= 0");
  if (yaw_range < 0)
    throw ValidationError("trajectory.yaw_range: must be >= 0");
  if (frames_per_row <= 0)
    throw ValidationError("trajectory.frames_per_row: must be > 0");
  if (pitch_rows.empty())
    throw ValidationError("trajectory.pitch_rows: must be nonempty");
  if (frame_count() < 2)
    throw ValidationError("trajectory: total frame count must be >= 2");
}

void NoiseSpec::validate() const {
  if (rot_drift_std < 0 || trans_drift_std < 0)
    throw ValidationError("noise.pose_drift: stds must be >= 0");
  if (gain_min > gain_max || gain_min <= 0)
    throw ValidationError("noise.exposure: gain range must be positive and ordered");
  if (bias_min > bias_max)
    throw ValidationError("noise.exposure: bias range must be ordered");
  if (depth_scale_min > depth_scale_max || depth_scale_min <= 0)
    throw ValidationError("noise.depth_affine: scale range must be positive and ordered");
  if (depth_shift_min > depth_shift_max)
    throw ValidationError("noise.depth_affine: shift range must be ordered");
  if (plane_scale_jitter < 0 || plane_shift_jitter < 0)
    throw ValidationError("noise.depth_affine: plane jitter must be >= 0");
  if (normal_noise_std < 0)
    throw ValidationError("noise.normal_noise: std must be >= 0");
}

bool NoiseSpec::is_zero() const {
  return rot_drift_std == 0 && trans_drift_std == 0 && gain_min == 1 &&
         gain_max == 1 && bias_min == 0 && bias_max == 0 &&
         depth_scale_min == 1 && depth_scale_max == 1 && depth_shift_min == 0 &&
         depth_shift_max == 0 && plane_scale_jitter == 0 &&
         plane_shift_jitter == 0 && normal_noise_std == 0;
}

std::vector<Pose> sample_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(spec.frame_count());
  const Eigen::Vector3d up(0, 0, 1);  // world z is up
  for (double pitch : spec.pitch_rows) {
    for (int i = 0; i < spec.frames_per_row; ++i) {
      const double yaw = spec.yaw_range * i / spec.frames_per_row;
      // Outward unit direction from the motion center.
      const Eigen::Vector3d d(std::cos(pitch) * std::cos(yaw),
                              std::cos(pitch) * std::sin(yaw), std::sin(pitch));
      const Eigen::Vector3d c = spec.center + spec.arm_radius * d;
      // Camera axes: z forward (outward), x right, y down.
      const Eigen::Vector3d zc = d;
      Eigen::Vector3d xc = zc.cross(up);
      if (xc.norm() < 1e-9) xc = Eigen::Vector3d::UnitY();
      xc.normalize();
      const Eigen::Vector3d yc = zc.cross(xc);
      Eigen::Matrix3d Rwc;  // columns: camera axes in world frame
      Rwc.col(0) = xc;
      Rwc.col(1) = yc;
      Rwc.col(2) = zc;
      Pose p;
      p.R = Rwc.transpose();
      p.t = -p.R * c;
      poses.push_back(p);
    }
  }
  return poses;
}

Intrinsics default_intrinsics(int height, int width) {
  Intrinsics K;
  K.fx = K.fy = 0.7 * width;
  K.cx = width * 0.5;
  K.cy = height * 0.5;
  return K;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal_w = Eigen::Vector3d::Zero();  // geometric, unnormalized sign
  Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
  int prim = -1;
};

void intersect_rect(const RectPlane& rp, int id, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d, Hit& best) {
  const Eigen::Vector3d n = rp.e1.cross(rp.e2);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-14) return;
  const double t = n.dot(rp.corner - o) / denom;
  if (t <= 1e-9 || t >= best.t) return;
  const Eigen::Vector3d p = o + t * d - rp.corner;
  // Solve p = a*e1 + b*e2 in the plane basis.
  const double g11 = rp.e1.squaredNorm(), g22 = rp.e2.squaredNorm(),
               g12 = rp.e1.dot(rp.e2);
  const double det = g11 * g22 - g12 * g12;
  const double p1 = p.dot(rp.e1), p2 = p.dot(rp.e2);
  const double a = (g22 * p1 - g12 * p2) / det;
  const double b = (g11 * p2 - g12 * p1) / det;
  if (a < 0 || a > 1 || b < 0 || b > 1) return;
  best.t = t;
  best.normal_w = n.normalized();
  best.albedo = rp.albedo.sample(a * rp.e1.norm(), b * rp.e2.norm());
  best.prim = id;
}

void intersect_box(const SceneSpec& scene, int box_idx, const Eigen::Vector3d& o,
                   const Eigen::Vector3d& d, Hit& best) {
  const BoxPrim& box = scene.boxes[box_idx];
  double t0 = 1e-9, t1 = best.t;
  int axis0 = -1, side0 = 0;
  for (int k = 0; k < 3; ++k) {
    const double inv = 1.0 / d[k];
    double ta = (box.pmin[k] - o[k]) * inv;
    double tb = (box.pmax[k] - o[k]) * inv;
    int side = tb < ta ? 1 : 0;  // which slab face is entered first
    if (tb < ta) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = k;
      side0 = side;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (axis0 < 0 || t0 >= best.t) return;
  // Face index: -x,+x,-y,+y,-z,+z. side0==0 means entering at pmin face when
  // the ray moves in +k, i.e. face -k; side0==1 enters at pmax face (+k).
  const int face = axis0 * 2 + (side0 == 0 ? 0 : 1);
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis0] = side0 == 0 ? -1.0 : 1.0;
  best.t = t0;
  best.normal_w = n;
  best.albedo = box.face_albedo[face];
  best.prim = scene.box_face_id(box_idx, face);
}

}  // namespace

CaptureFrame render_ground_truth(const SceneSpec& scene, const Pose& pose,
                                 const Intrinsics& K, int height, int width) {
  scene.validate();
  CaptureFrame fr;
  fr.image = Image(height, width, 3);
  fr.depth = Image(height, width, 1);
  fr.normal = Image(height, width, 3);
  fr.prim_id = Image(height, width, 1, -1.0);
  fr.pose = pose;
  fr.K = K;

  const Eigen::Vector3d origin = pose.center();
  const Eigen::Matrix3d Rcw = pose.R.transpose();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Ray through the pixel center; parameter t equals camera-frame z.
      const Eigen::Vector3d dir_c((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d dir_w = Rcw * dir_c;
      Hit hit;
      for (size_t i = 0; i < scene.planes.size(); ++i)
        intersect_rect(scene.planes[i], static_cast<int>(i), origin, dir_w, hit);
      for (size_t i = 0; i < scene.boxes.size(); ++i)
        intersect_box(scene, static_cast<int>(i), origin, dir_w, hit);
      if (hit.prim < 0) continue;

      // Orient the geometric normal toward the camera.
      Eigen::Vector3d n_w = hit.normal_w;
      if (n_w.dot(dir_w) > 0) n_w = -n_w;
      const Eigen::Vector3d n_c = pose.R * n_w;

      const double ndl = std::max(0.0, n_w.dot(scene.light.direction));
      Eigen::Vector3d col =
          hit.albedo.array() *
          (scene.light.ambient.array() + ndl * scene.light.intensity.array());
      col = col.cwiseMin(1.0).cwiseMax(0.0);

      fr.depth.at(y, x) = hit.t;
      fr.prim_id.at(y, x) = hit.prim;
      for (int ch = 0; ch < 3; ++ch) {
        fr.image.at(y, x, ch) = col[ch];
        fr.normal.at(y, x, ch) = n_c[ch];
      }
    }
  }
  return fr;
}

CaptureBundle corrupt_bundle(const std::vector<CaptureFrame>& gt_frames,
                             const NoiseSpec& noise, uint64_t seed) {
  if (gt_frames.empty())
    throw ValidationError("corrupt_bundle: need at least one frame");
  noise.validate();

  CaptureBundle bundle;
  bundle.gt_frames = gt_frames;
  bundle.noise = noise;
  bundle.seed = seed;
  bundle.height = gt_frames[0].image.h;
  bundle.width = gt_frames[0].image.w;

  // Max primitive id across frames, for per-plane jitter tables.
  int max_prim = -1;
  for (const auto& fr : gt_frames)
    for (double id : fr.prim_id.v) max_prim = std::max(max_prim, static_cast<int>(id));

  Pose drift;  // accumulated perturbation, applied camera-side
  Rng drift_rng(mix_seed(seed, 1));
  for (size_t v = 0; v < gt_frames.size(); ++v) {
    const CaptureFrame& gt = gt_frames[v];
    CaptureFrame fr = gt;
    AppliedViewNoise applied;
    Rng rng(mix_seed(seed, 100 + v));

    // Pose drift: random walk composed on the right of the previous
    // perturbation, then applied as corrupted = drift * gt_pose.
    {
      Eigen::Vector3d w(drift_rng.normal(), drift_rng.normal(), drift_rng.normal());
      w *= noise.rot_drift_std;
      Eigen::Vector3d u(drift_rng.normal(), drift_rng.normal(), drift_rng.normal());
      u *= noise.trans_drift_std;
      Pose inc;
      const double ang = w.norm();
      inc.R = ang > 0 ? axis_angle_to_rot(w / ang, ang) : Eigen::Matrix3d::Identity();
      inc.t = u;
      drift = Pose::compose(drift, inc);
      fr.pose = Pose::compose(drift, gt.pose);
    }

    // Exposure: per-channel gain/bias, clamp to [0,1].
    for (int ch = 0; ch < 3; ++ch) {
      applied.gain[ch] = rng.uniform(noise.gain_min, noise.gain_max);
      applied.bias[ch] = rng.uniform(noise.bias_min, noise.bias_max);
    }
    for (int y = 0; y < fr.image.h; ++y)
      for (int x = 0; x < fr.image.w; ++x)
        for (int ch = 0; ch < 3; ++ch)
          fr.image.at(y, x, ch) = std::clamp(
              applied.gain[ch] * gt.image.at(y, x, ch) + applied.bias[ch], 0.0, 1.0);

    // Depth: inverse-affine D' = (D - shift)/scale so an affine fit recovers
    // (scale, shift) exactly. Optional per-plane jitter on top.
    applied.depth_scale = rng.uniform(noise.depth_scale_min, noise.depth_scale_max);
    applied.depth_shift = rng.uniform(noise.depth_shift_min, noise.depth_shift_max);
    applied.plane_scale.assign(max_prim + 1, applied.depth_scale);
    applied.plane_shift.assign(max_prim + 1, applied.depth_shift);
    if (noise.plane_scale_jitter > 0 || noise.plane_shift_jitter > 0) {
      for (int p = 0; p <= max_prim; ++p) {
        applied.plane_scale[p] *=
            1.0 + rng.uniform(-noise.plane_scale_jitter, noise.plane_scale_jitter);
        applied.plane_shift[p] +=
            rng.uniform(-noise.plane_shift_jitter, noise.plane_shift_jitter);
      }
    }
    for (int y = 0; y < fr.depth.h; ++y)
      for (int x = 0; x < fr.depth.w; ++x) {
        const double d = gt.depth.at(y, x);
        if (d <= 0) continue;
        const int p = static_cast<int>(gt.prim_id.at(y, x));
        const double s = p >= 0 ? applied.plane_scale[p] : applied.depth_scale;
        const double b = p >= 0 ? applied.plane_shift[p] : applied.depth_shift;
        fr.depth.at(y, x) = (d - b) / s;
      }

    // Normal noise: small per-pixel random rotation.
    if (noise.normal_noise_std > 0) {
      for (int y = 0; y < fr.normal.h; ++y)
        for (int x = 0; x < fr.normal.w; ++x) {
          Eigen::Vector3d n(fr.normal.at(y, x, 0), fr.normal.at(y, x, 1),
                            fr.normal.at(y, x, 2));
          if (n.squaredNorm() < 0.5) continue;
          Eigen::Vector3d ax(rng.normal(), rng.normal(), rng.normal());
          if (ax.norm() < 1e-12) continue;
          ax.normalize();
          const double ang = rng.normal(0.0, noise.normal_noise_std);
          n = axis_angle_to_rot(ax, ang) * n;
          for (int ch = 0; ch < 3; ++ch) fr.normal.at(y, x, ch) = n[ch];
        }
    }

    bundle.frames.push_back(std::move(fr));
    bundle.applied.push_back(std::move(applied));
  }
  return bundle;
}

SceneSpec box_room_scene(bool with_boxes) {
  SceneSpec scene;
  const double s = 2.0;  // half extent: 4 m room
  auto wall = [&](const Eigen::Vector3d& corner, const Eigen::Vector3d& e1,
                  const Eigen::Vector3d& e2, const TextureDesc& tex) {
    RectPlane p;
    p.corner = corner;
    p.e1 = e1;
    p.e2 = e2;
    p.albedo = tex;
    scene.planes.push_back(p);
  };
  TextureDesc check;
  check.kind = TextureDesc::Kind::Checker;
  check.color_a = {0.62, 0.55, 0.45};
  check.color_b = {0.35, 0.40, 0.50};
  check.scale = 0.6;
  TextureDesc stripes;
  stripes.kind = TextureDesc::Kind::Stripes;
  stripes.color_a = {0.55, 0.30, 0.28};
  stripes.color_b = {0.30, 0.48, 0.32};
  stripes.scale = 0.45;
  TextureDesc plain_floor;
  plain_floor.color_a = {0.42, 0.36, 0.30};
  TextureDesc plain_ceil;
  plain_ceil.color_a = {0.66, 0.66, 0.62};
  TextureDesc plain_wall;
  plain_wall.color_a = {0.58, 0.56, 0.52};

  // Room shell, normals irrelevant (shaded two-sided).
  wall({-s, -s, -s}, {2 * s, 0, 0}, {0, 0, 2 * s}, check);        // y = -s
  wall({-s, s, -s}, {2 * s, 0, 0}, {0, 0, 2 * s}, stripes);       // y = +s
  wall({-s, -s, -s}, {0, 2 * s, 0}, {0, 0, 2 * s}, plain_wall);   // x = -s
  wall({s, -s, -s}, {0, 2 * s, 0}, {0, 0, 2 * s}, check);         // x = +s
  wall({-s, -s, -s}, {2 * s, 0, 0}, {0, 2 * s, 0}, plain_floor);  // z = -s
  wall({-s, -s, s}, {2 * s, 0, 0}, {0, 2 * s, 0}, plain_ceil);    // z = +s

  if (with_boxes) {
    BoxPrim b1;
    b1.pmin = {0.8, -1.4, -2.0};
    b1.pmax = {1.7, -0.6, -1.1};
    for (int f = 0; f < 6; ++f) b1.face_albedo[f] = {0.55, 0.25, 0.20};
    b1.face_albedo[5] = {0.7, 0.6, 0.2};
    scene.boxes.push_back(b1);

    BoxPrim b2;
    b2.pmin = {-1.8, 0.7, -2.0};
    b2.pmax = {-1.0, 1.6, -0.6};
    for (int f = 0; f < 6; ++f) b2.face_albedo[f] = {0.22, 0.35, 0.55};
    b2.face_albedo[1] = {0.5, 0.5, 0.25};
    scene.boxes.push_back(b2);
  }

  scene.light.ambient = {0.35, 0.35, 0.35};
  scene.light.direction = Eigen::Vector3d(0.3, -0.25, 0.9).normalized();
  scene.light.intensity = {0.55, 0.55, 0.55};
  return scene;
}

}  // namespace panosplat
