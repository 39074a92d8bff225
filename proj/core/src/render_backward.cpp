#include <algorithm>
#include <cmath>
#include <vector>

#include "panosplat/errors.hpp"
#include "panosplat/render.hpp"

namespace panosplat {

namespace {

// Per-(tile, gaussian) accumulator for the screen-space half of the chain.
struct TileAccum {
  int32_t gaussian = -1;
  Eigen::Vector3d d_color = Eigen::Vector3d::Zero();
  double d_depth = 0;
  Eigen::Vector3d d_normal = Eigen::Vector3d::Zero();
  double d_opacity = 0;  // w.r.t. the post-sigmoid opacity value
  Eigen::Vector2d d_mean2d = Eigen::Vector2d::Zero();
  Eigen::Matrix2d d_conic = Eigen::Matrix2d::Zero();
  double abs_grad = 0;
};

inline bool has_image(const Image& im) { return im.h > 0 && im.w > 0; }

}  // namespace

Gradients backward(const GaussianCloud& cloud, const RenderCache& cache,
                   const Image& dL_dcolor, const Image& dL_ddepth,
                   const Image& dL_dnormal,
                   const Eigen::Matrix3d* dL_dR_adjusted) {
  if (!cache.valid) throw RenderError("backward: render cache is not valid");
  const size_t n = cloud.size();
  const int h = cache.h, w = cache.w;
  const int tiles = cache.tiles_x * cache.tiles_y;
  const bool use_color = has_image(dL_dcolor);
  const bool use_depth = has_image(dL_ddepth);
  const bool use_normal = has_image(dL_dnormal);

  Gradients g;
  g.resize(n);

  // Phase A: parallel over tiles, replaying each pixel's blend from the
  // cached contribution lists. All per-gaussian sums stay tile-local.
  std::vector<std::vector<TileAccum>> tile_accums(tiles);
  std::vector<Eigen::Vector3d> tile_tone_w(tiles, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> tile_tone_b(tiles, Eigen::Vector3d::Zero());

#pragma omp parallel
  {
    std::vector<int32_t> slot(n, -1);  // gaussian -> tile-local index
#pragma omp for schedule(dynamic)
    for (int tile = 0; tile < tiles; ++tile) {
      const auto& list = cache.tile_lists[tile];
      if (list.empty()) continue;
      auto& acc = tile_accums[tile];
      acc.reserve(list.size());
      for (int32_t i : list) {
        slot[i] = static_cast<int32_t>(acc.size());
        acc.emplace_back();
        acc.back().gaussian = i;
      }

      const int tx = tile % cache.tiles_x, ty = tile / cache.tiles_x;
      const int px0 = tx * kTileSize, py0 = ty * kTileSize;
      const int px1 = std::min(w, px0 + kTileSize);
      const int py1 = std::min(h, py0 + kTileSize);
      std::vector<double> Ts;  // transmittance in front of contribution j
      for (int y = py0; y < py1; ++y)
        for (int x = px0; x < px1; ++x) {
          const auto& contribs = cache.pixel_contribs[static_cast<size_t>(y) * w + x];
          if (contribs.empty()) continue;

          Eigen::Vector3d gC = Eigen::Vector3d::Zero();
          double gD = 0;
          Eigen::Vector3d gN = Eigen::Vector3d::Zero();
          if (use_color)
            for (int ch = 0; ch < 3; ++ch) {
              double v = dL_dcolor.at(y, x, ch);
              if (cache.has_tone) {
                tile_tone_w[tile][ch] += v * cache.pre_tone_color.at(y, x, ch);
                tile_tone_b[tile][ch] += v;
                v *= cache.tone.w[ch];
              }
              gC[ch] = v;
            }
          if (use_depth) gD = dL_ddepth.at(y, x);
          if (use_normal)
            for (int ch = 0; ch < 3; ++ch) gN[ch] = dL_dnormal.at(y, x, ch);
          if (gC.isZero() && gD == 0.0 && gN.isZero()) continue;

          Ts.resize(contribs.size());
          double T = 1.0;
          for (size_t j = 0; j < contribs.size(); ++j) {
            Ts[j] = T;
            T *= 1.0 - contribs[j].alpha;
          }

          // Back-to-front: suffix = blended value contributed behind j.
          Eigen::Vector3d suf_c = Eigen::Vector3d::Zero();
          double suf_d = 0;
          Eigen::Vector3d suf_n = Eigen::Vector3d::Zero();
          for (size_t jj = contribs.size(); jj-- > 0;) {
            const int32_t i = contribs[jj].gaussian;
            const double alpha = contribs[jj].alpha;
            const double Tj = Ts[jj];
            const auto& pg = cache.proj[i];
            TileAccum& a = acc[slot[i]];

            const double aT = alpha * Tj;
            a.d_color += gC * aT;
            a.d_depth += gD * aT;
            a.d_normal += gN * aT;

            double dL_dalpha =
                gC.dot(pg.color * Tj - suf_c / (1.0 - alpha)) +
                gD * (pg.depth * Tj - suf_d / (1.0 - alpha)) +
                gN.dot(pg.normal_w * Tj - suf_n / (1.0 - alpha));

            suf_c += pg.color * aT;
            suf_d += pg.depth * aT;
            suf_n += pg.normal_w * aT;

            if (alpha >= kAlphaClamp) continue;  // clamped: flat w.r.t. o, G
            const double G = alpha / pg.opacity;
            a.d_opacity += dL_dalpha * G;
            const double dL_dG = dL_dalpha * pg.opacity;
            const Eigen::Vector2d d(x - pg.mean2d.x(), y - pg.mean2d.y());
            const Eigen::Vector2d cd = pg.conic * d;
            const Eigen::Vector2d dm = dL_dG * G * cd;
            a.d_mean2d += dm;
            a.d_conic += (dL_dG * G * -0.5) * (d * d.transpose());
            a.abs_grad += dm.norm();
          }
        }

      for (int32_t i : list) slot[i] = -1;
    }
  }

  // Phase B: sequential reduction in tile order -> per-gaussian totals.
  std::vector<Eigen::Vector3d> t_color(n, Eigen::Vector3d::Zero());
  std::vector<double> t_depth(n, 0.0);
  std::vector<Eigen::Vector3d> t_normal(n, Eigen::Vector3d::Zero());
  std::vector<double> t_opacity(n, 0.0);
  std::vector<Eigen::Vector2d> t_mean2d(n, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> t_conic(n, Eigen::Matrix2d::Zero());
  for (int tile = 0; tile < tiles; ++tile) {
    for (const auto& a : tile_accums[tile]) {
      const int32_t i = a.gaussian;
      t_color[i] += a.d_color;
      t_depth[i] += a.d_depth;
      t_normal[i] += a.d_normal;
      t_opacity[i] += a.d_opacity;
      t_mean2d[i] += a.d_mean2d;
      t_conic[i] += a.d_conic;
      g.abs_grad[i] += a.abs_grad;
    }
    if (cache.has_tone) {
      g.d_tone_w += tile_tone_w[tile];
      g.d_tone_b += tile_tone_b[tile];
    }
  }

  // Phase C: parallel per-gaussian parameter chains.
  const bool need_pose = cache.has_residual;
  std::vector<Eigen::Matrix3d> pose_dR;
  std::vector<Eigen::Vector3d> pose_dt, pose_dcc;
  if (need_pose) {
    pose_dR.assign(n, Eigen::Matrix3d::Zero());
    pose_dt.assign(n, Eigen::Vector3d::Zero());
    pose_dcc.assign(n, Eigen::Vector3d::Zero());
  }
  const Pose& pose = cache.adjusted_pose;
  const Intrinsics& K = cache.K;

#pragma omp parallel for schedule(static)
  for (long long oi = 0; oi < static_cast<long long>(cache.order.size()); ++oi) {
    const int32_t i = cache.order[oi];
    const auto& pg = cache.proj[i];

    Eigen::Vector3d d_mu = Eigen::Vector3d::Zero();
    Eigen::Vector3d d_xcam = Eigen::Vector3d::Zero();

    // Opacity: value -> logit through the sigmoid.
    g.d_opacity_logit[i] = t_opacity[i] * pg.opacity * (1.0 - pg.opacity);

    // Color -> SH coefficients and viewing direction.
    const Eigen::Vector3d& dC = t_color[i];
    g.d_sh_dc[i] = kShC0 * dC;
    Eigen::Vector3d d_dir = Eigen::Vector3d::Zero();
    const Eigen::Matrix3d& sr = cloud.sh_rest[i];
    for (int ch = 0; ch < 3; ++ch) {
      g.d_sh_rest[i](0, ch) = -kShC1 * pg.dir.y() * dC[ch];
      g.d_sh_rest[i](1, ch) = kShC1 * pg.dir.z() * dC[ch];
      g.d_sh_rest[i](2, ch) = -kShC1 * pg.dir.x() * dC[ch];
      d_dir.x() += -kShC1 * sr(2, ch) * dC[ch];
      d_dir.y() += -kShC1 * sr(0, ch) * dC[ch];
      d_dir.z() += kShC1 * sr(1, ch) * dC[ch];
    }
    // dir = v / |v| with v = mu - camera center.
    const Eigen::Vector3d d_v =
        (d_dir - pg.dir * pg.dir.dot(d_dir)) / pg.dir_range;
    d_mu += d_v;
    if (need_pose) pose_dcc[i] -= d_v;

    // Conic -> 2D covariance: Q = S2^-1, dS2 = -Q dQ Q.
    const Eigen::Matrix2d d_cov2d =
        -pg.conic * t_conic[i] * pg.conic;

    // S2 = T Sigma T^T + dilation, T = J W.
    const Eigen::Matrix3d W = pose.R;
    const Eigen::Matrix<double, 2, 3> T = pg.J * W;
    const Eigen::Matrix3d sigma = covariance_from_qs(cloud.rot[i], cloud.log_scale[i]);
    const Eigen::Matrix<double, 2, 3> d_T = 2.0 * d_cov2d * T * sigma;
    Eigen::Matrix3d d_sigma = T.transpose() * d_cov2d * T;
    const Eigen::Matrix<double, 2, 3> d_J = d_T * W.transpose();
    if (need_pose) pose_dR[i] += pg.J.transpose() * d_T;

    // J entries back to the camera-space point.
    const double x = pg.x_cam.x(), y = pg.x_cam.y(), z = pg.x_cam.z();
    d_xcam.x() += d_J(0, 2) * (-K.fx / (z * z));
    d_xcam.y() += d_J(1, 2) * (-K.fy / (z * z));
    d_xcam.z() += d_J(0, 0) * (-K.fx / (z * z)) + d_J(1, 1) * (-K.fy / (z * z)) +
                  d_J(0, 2) * (2.0 * K.fx * x / (z * z * z)) +
                  d_J(1, 2) * (2.0 * K.fy * y / (z * z * z));

    // Screen mean and blended depth value.
    const Eigen::Vector2d& dm = t_mean2d[i];
    d_xcam.x() += dm.x() * K.fx / z;
    d_xcam.y() += dm.y() * K.fy / z;
    d_xcam.z() += -dm.x() * K.fx * x / (z * z) - dm.y() * K.fy * y / (z * z);
    d_xcam.z() += t_depth[i];

    // x_cam = R mu + t.
    d_mu += pose.R.transpose() * d_xcam;
    if (need_pose) {
      pose_dR[i] += d_xcam * cloud.mu[i].transpose();
      pose_dt[i] += d_xcam;
    }

    // Sigma = Rg diag(e^{2s}) Rg^T.
    const Eigen::Matrix3d Rg = quat_to_rot(cloud.rot[i]);
    const Eigen::Vector3d e2s = (2.0 * cloud.log_scale[i].array()).exp();
    Eigen::Matrix3d d_Rg = 2.0 * d_sigma * Rg * e2s.asDiagonal();
    for (int k = 0; k < 3; ++k)
      g.d_log_scale[i][k] =
          2.0 * e2s[k] * Rg.col(k).dot(d_sigma * Rg.col(k));

    // Blended world-normal value: sign * Rg column of the minimal axis.
    d_Rg.col(pg.min_axis) += pg.normal_sign * t_normal[i];

    const auto Jq = quat_to_rot_jacobian(cloud.rot[i]);
    for (int k = 0; k < 4; ++k)
      g.d_rot[i][k] = (Jq[k].array() * d_Rg.array()).sum();

    g.d_mu[i] = d_mu;
  }

  // Phase D: sequential pose reduction in cloud-index order.
  if (need_pose) {
    Eigen::Matrix3d d_R = Eigen::Matrix3d::Zero();
    Eigen::Vector3d d_t = Eigen::Vector3d::Zero();
    Eigen::Vector3d d_cc = Eigen::Vector3d::Zero();
    for (int32_t i : cache.order) {
      d_R += pose_dR[i];
      d_t += pose_dt[i];
      d_cc += pose_dcc[i];
    }
    // Camera center cc = -R^T t.
    d_R += -pose.t * d_cc.transpose();
    d_t += -pose.R * d_cc;
    if (dL_dR_adjusted) d_R += *dL_dR_adjusted;

    // Adjusted = residual composed with the base: R = Rd R0, t = Rd t0 + td.
    const Pose& base = cache.base_pose;
    const Eigen::Matrix3d d_Rd =
        d_R * base.R.transpose() + d_t * base.t.transpose();
    g.d_res_t = d_t;
    const auto Jq = quat_to_rot_jacobian(cache.residual.q);
    for (int k = 0; k < 4; ++k)
      g.d_res_q[k] = (Jq[k].array() * d_Rd.array()).sum();
  } else if (dL_dR_adjusted) {
    throw RenderError("backward: dL_dR_adjusted requires a residual pose");
  }

  return g;
}

}  // namespace panosplat
