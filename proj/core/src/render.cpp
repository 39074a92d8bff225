#include "panosplat/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "panosplat/errors.hpp"

namespace panosplat {

void Gradients::resize(size_t n) {
  d_mu.assign(n, Eigen::Vector3d::Zero());
  d_rot.assign(n, Eigen::Vector4d::Zero());
  d_log_scale.assign(n, Eigen::Vector3d::Zero());
  d_opacity_logit.assign(n, 0.0);
  d_sh_dc.assign(n, Eigen::Vector3d::Zero());
  d_sh_rest.assign(n, Eigen::Matrix3d::Zero());
  abs_grad.assign(n, 0.0);
}

ProjectedGaussian project_gaussian(const Eigen::Vector3d& mu,
                                   const Eigen::Vector4d& q,
                                   const Eigen::Vector3d& log_scale,
                                   const Pose& pose, const Intrinsics& K, int h,
                                   int w) {
  ProjectedGaussian pg;
  pg.x_cam = pose.to_camera(mu);
  pg.depth = pg.x_cam.z();
  if (pg.depth < kNearClip) return pg;  // culled

  const double x = pg.x_cam.x(), y = pg.x_cam.y(), z = pg.x_cam.z();
  pg.mean2d = {K.fx * x / z + K.cx, K.fy * y / z + K.cy};
  pg.J << K.fx / z, 0, -K.fx * x / (z * z), 0, K.fy / z, -K.fy * y / (z * z);

  const Eigen::Matrix3d sigma = covariance_from_qs(q, log_scale);
  const Eigen::Matrix<double, 2, 3> T = pg.J * pose.R;
  pg.cov2d = T * sigma * T.transpose() + kCovDilation * Eigen::Matrix2d::Identity();
  const double det = pg.cov2d.determinant();
  if (det <= 0) return pg;
  pg.conic = pg.cov2d.inverse();

  const double mid = 0.5 * pg.cov2d.trace();
  const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  pg.radius_px = kExtent99 * std::sqrt(lam_max);
  if (pg.mean2d.x() + pg.radius_px < 0 || pg.mean2d.x() - pg.radius_px > w - 1 ||
      pg.mean2d.y() + pg.radius_px < 0 || pg.mean2d.y() - pg.radius_px > h - 1)
    return pg;  // 99% extent ellipse misses the image

  pg.culled = false;
  return pg;
}

namespace {

void finish_projection(ProjectedGaussian& pg, const GaussianCloud& cloud,
                       size_t i, const Pose& pose) {
  // Viewing direction for SH evaluation.
  const Eigen::Vector3d cc = pose.center();
  Eigen::Vector3d v = cloud.mu[i] - cc;
  pg.dir_range = std::max(v.norm(), 1e-12);
  pg.dir = v / pg.dir_range;
  const double dx = pg.dir.x(), dy = pg.dir.y(), dz = pg.dir.z();
  for (int ch = 0; ch < 3; ++ch) {
    double c = 0.5 + kShC0 * cloud.sh_dc[i][ch];
    c += -kShC1 * dy * cloud.sh_rest[i](0, ch);
    c += kShC1 * dz * cloud.sh_rest[i](1, ch);
    c += -kShC1 * dx * cloud.sh_rest[i](2, ch);
    pg.color[ch] = c;
  }
  pg.opacity = sigmoid(cloud.opacity_logit[i]);

  // World normal: minimal-scale axis of R, oriented toward the camera.
  const Eigen::Vector3d& s = cloud.log_scale[i];
  int k = 0;
  if (s[1] < s[k]) k = 1;
  if (s[2] < s[k]) k = 2;
  pg.min_axis = k;
  const Eigen::Matrix3d R = quat_to_rot(cloud.rot[i]);
  Eigen::Vector3d n = R.col(k);
  pg.normal_sign = n.dot(cc - cloud.mu[i]) >= 0 ? 1.0 : -1.0;
  pg.normal_w = pg.normal_sign * n;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const Pose& base_pose,
                    const ResidualPose* residual, const Intrinsics& K, int h,
                    int w, const ToneParams* tone, RenderCache* cache) {
  const size_t n = cloud.size();
  RenderOutput out;
  out.color = Image(h, w, 3);
  out.depth = Image(h, w, 1);
  out.normal = Image(h, w, 3);
  out.alpha = Image(h, w, 1);
  out.stats.max_radius_px.assign(n, 0.0);
  out.stats.visible.assign(n, 0);
  out.stats.pixel_count.assign(n, 0);

  const Pose pose =
      residual ? Pose::compose(residual->as_pose(), base_pose) : base_pose;

  std::vector<ProjectedGaussian> proj(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    if (!cloud.mu[i].allFinite() || !cloud.rot[i].allFinite() ||
        !cloud.log_scale[i].allFinite() ||
        !std::isfinite(cloud.opacity_logit[i]) || !cloud.sh_dc[i].allFinite() ||
        !cloud.sh_rest[i].allFinite())
      throw RenderError("render: non-finite parameters at Gaussian " +
                        std::to_string(i));
    proj[i] =
        project_gaussian(cloud.mu[i], cloud.rot[i], cloud.log_scale[i], pose, K, h, w);
    if (!proj[i].culled) finish_projection(proj[i], cloud, i, pose);
  }

  // Global stable depth sort; ties fall back to index order.
  std::vector<int32_t> order;
  order.reserve(n);
  for (size_t i = 0; i < n; ++i)
    if (!proj[i].culled) order.push_back(static_cast<int32_t>(i));
  std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    return proj[a].depth < proj[b].depth;
  });

  for (int32_t i : order) {
    out.stats.visible[i] = 1;
    out.stats.max_radius_px[i] = proj[i].radius_px;
  }

  // Per-tile lists in global sorted order.
  const int tiles_x = (w + kTileSize - 1) / kTileSize;
  const int tiles_y = (h + kTileSize - 1) / kTileSize;
  std::vector<std::vector<int32_t>> tile_lists(
      static_cast<size_t>(tiles_x) * tiles_y);
  for (int32_t i : order) {
    const auto& pg = proj[i];
    const int x0 = std::max(0, static_cast<int>(std::floor(pg.mean2d.x() - pg.radius_px)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(pg.mean2d.x() + pg.radius_px)));
    const int y0 = std::max(0, static_cast<int>(std::floor(pg.mean2d.y() - pg.radius_px)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(pg.mean2d.y() + pg.radius_px)));
    for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty)
      for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx)
        tile_lists[static_cast<size_t>(ty) * tiles_x + tx].push_back(i);
  }

  if (cache) {
    cache->pixel_contribs.assign(static_cast<size_t>(h) * w, {});
  }
  std::vector<int> pixel_count(n, 0);

#pragma omp parallel
  {
    std::vector<int> local_count(n, 0);
#pragma omp for schedule(dynamic)
    for (int tile = 0; tile < tiles_x * tiles_y; ++tile) {
      const int tx = tile % tiles_x, ty = tile / tiles_x;
      const auto& list = tile_lists[tile];
      const int px0 = tx * kTileSize, py0 = ty * kTileSize;
      const int px1 = std::min(w, px0 + kTileSize), py1 = std::min(h, py0 + kTileSize);
      for (int y = py0; y < py1; ++y)
        for (int x = px0; x < px1; ++x) {
          double T = 1.0;
          Eigen::Vector3d col = Eigen::Vector3d::Zero();
          double depth_acc = 0.0;
          Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
          double alpha_acc = 0.0;
          std::vector<PixelContribution>* contribs = nullptr;
          if (cache) contribs = &cache->pixel_contribs[static_cast<size_t>(y) * w + x];
          for (int32_t i : list) {
            const auto& pg = proj[i];
            const Eigen::Vector2d d(x - pg.mean2d.x(), y - pg.mean2d.y());
            const double power = -0.5 * d.dot(pg.conic * d);
            if (power > 0) continue;
            const double alpha = std::min(kAlphaClamp, pg.opacity * std::exp(power));
            if (alpha < kMinAlpha) continue;
            col += pg.color * (alpha * T);
            depth_acc += pg.depth * alpha * T;
            nrm += pg.normal_w * (alpha * T);
            alpha_acc += alpha * T;
            ++local_count[i];
            if (contribs) contribs->push_back({i, alpha});
            T *= 1.0 - alpha;
            if (T < kTransmittanceEps) break;
          }
          for (int ch = 0; ch < 3; ++ch) {
            out.color.at(y, x, ch) = col[ch];
            out.normal.at(y, x, ch) = nrm[ch];
          }
          out.depth.at(y, x) = depth_acc;
          out.alpha.at(y, x) = alpha_acc;
        }
    }
#pragma omp critical
    for (size_t i = 0; i < n; ++i) pixel_count[i] += local_count[i];
  }
  out.stats.pixel_count = std::move(pixel_count);

  if (cache) {
    cache->pre_tone_color = out.color;
    cache->proj = std::move(proj);
    cache->order = std::move(order);
    cache->tile_lists = std::move(tile_lists);
    cache->tiles_x = tiles_x;
    cache->tiles_y = tiles_y;
    cache->base_pose = base_pose;
    cache->has_residual = residual != nullptr;
    if (residual) cache->residual = *residual;
    cache->has_tone = tone != nullptr;
    if (tone) cache->tone = *tone;
    cache->adjusted_pose = pose;
    cache->K = K;
    cache->h = h;
    cache->w = w;
    cache->valid = true;
  }

  if (tone) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch)
          out.color.at(y, x, ch) = tone->w[ch] * out.color.at(y, x, ch) + tone->b[ch];
  }
  return out;
}

Image render_panorama(const GaussianCloud& cloud, const Eigen::Vector3d& center,
                      int face_resolution) {
  const int fr = face_resolution;
  Intrinsics K;
  K.fx = K.fy = fr / 2.0;  // 90 degree FOV
  K.cx = K.cy = fr / 2.0;

  // Cube face orientations: camera z axis along the face direction.
  // Order: +x, -x, +y, -y, +z, -z (world frame).
  std::vector<Eigen::Matrix3d> rots;
  auto face = [&](const Eigen::Vector3d& fwd, const Eigen::Vector3d& up) {
    // Columns of Rwc are the camera axes in world coordinates; R = Rwc^T.
    Eigen::Matrix3d Rwc;
    Rwc.col(2) = fwd.normalized();
    Rwc.col(0) = -up.cross(Rwc.col(2)).normalized();  // x right, y down
    Rwc.col(1) = Rwc.col(2).cross(Rwc.col(0));
    return Rwc.transpose().eval();
  };
  const Eigen::Vector3d up(0, 0, 1);
  rots.push_back(face({1, 0, 0}, up));
  rots.push_back(face({-1, 0, 0}, up));
  rots.push_back(face({0, 1, 0}, up));
  rots.push_back(face({0, -1, 0}, up));
  rots.push_back(face({0, 0, 1}, {1, 0, 0}));
  rots.push_back(face({0, 0, -1}, {-1, 0, 0}));

  std::vector<Image> faces;
  std::vector<Pose> poses;
  for (const auto& R : rots) {
    Pose p;
    p.R = R;
    p.t = -R * center;
    poses.push_back(p);
    faces.push_back(render(cloud, p, nullptr, K, fr, fr).color);
  }

  const int ph = 2 * fr, pw = 4 * fr;  // 2:1 equirectangular
  Image pano(ph, pw, 3);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < ph; ++y) {
    const double lat = M_PI * (0.5 - (y + 0.5) / ph);  // +pi/2 (top) .. -pi/2
    for (int x = 0; x < pw; ++x) {
      const double lon = 2.0 * M_PI * (x + 0.5) / pw - M_PI;
      const Eigen::Vector3d dir(std::cos(lat) * std::cos(lon),
                                std::cos(lat) * std::sin(lon), std::sin(lat));
      // Pick the face with the largest |axis| component.
      int best = 0;
      double bestdot = -1;
      for (int fidx = 0; fidx < 6; ++fidx) {
        const Eigen::Vector3d fwd = poses[fidx].R.row(2).transpose();
        const double d = dir.dot(fwd);
        if (d > bestdot) {
          bestdot = d;
          best = fidx;
        }
      }
      const Eigen::Vector3d dc = poses[best].R * dir;
      if (dc.z() <= 1e-9) continue;
      const double u = K.fx * dc.x() / dc.z() + K.cx;
      const double v = K.fy * dc.y() / dc.z() + K.cy;
      // Bilinear sample with clamped borders.
      const double uc = std::clamp(u, 0.0, fr - 1.0);
      const double vc = std::clamp(v, 0.0, fr - 1.0);
      const int u0 = static_cast<int>(uc), v0 = static_cast<int>(vc);
      const int u1 = std::min(u0 + 1, fr - 1), v1 = std::min(v0 + 1, fr - 1);
      const double fu = uc - u0, fv = vc - v0;
      for (int ch = 0; ch < 3; ++ch) {
        const double val = (1 - fu) * (1 - fv) * faces[best].at(v0, u0, ch) +
                           fu * (1 - fv) * faces[best].at(v0, u1, ch) +
                           (1 - fu) * fv * faces[best].at(v1, u0, ch) +
                           fu * fv * faces[best].at(v1, u1, ch);
        pano.at(y, x, ch) = val;
      }
    }
  }
  return pano;
}

}  // namespace panosplat
