#include "panosplat/scaffold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "panosplat/errors.hpp"

namespace panosplat {

ProjectedDepth project_points(const std::vector<Eigen::Vector3d>& points,
                              const Pose& pose, const Intrinsics& K, int height,
                              int width) {
  ProjectedDepth out;
  out.depth = Image(height, width, 1);
  out.hit = Image(height, width, 1);
  for (const auto& pw : points) {
    const Eigen::Vector3d pc = pose.to_camera(pw);
    if (pc.z() <= 0) continue;
    const int u = static_cast<int>(std::lround(K.fx * pc.x() / pc.z() + K.cx));
    const int v = static_cast<int>(std::lround(K.fy * pc.y() / pc.z() + K.cy));
    if (u < 0 || u >= width || v < 0 || v >= height) continue;
    if (out.hit.at(v, u) == 0.0 || pc.z() < out.depth.at(v, u)) {
      out.depth.at(v, u) = pc.z();
      out.hit.at(v, u) = 1.0;
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> back_project(const Image& depth, const Image& mask,
                                          const Pose& pose, const Intrinsics& K) {
  std::vector<Eigen::Vector3d> out;
  const Eigen::Matrix3d Rcw = pose.R.transpose();
  const Eigen::Vector3d c = pose.center();
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x) {
      if (mask.at(y, x) == 0.0) continue;
      const double d = depth.at(y, x);
      if (d <= 0)
        throw ValidationError("back_project: non-positive depth at masked pixel (" +
                              std::to_string(x) + "," + std::to_string(y) + ")");
      const Eigen::Vector3d pc((x - K.cx) / K.fx * d, (y - K.cy) / K.fy * d, d);
      out.push_back(Rcw * pc + c);
    }
  return out;
}

namespace {

struct FitSamples {
  std::vector<double> d;  // raw depth
  std::vector<double> p;  // projected target
};

FitSamples gather_samples(const Image& depth, const Image& proj, const Image& mask) {
  FitSamples s;
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x)
      if (mask.at(y, x) != 0.0) {
        s.d.push_back(depth.at(y, x));
        s.p.push_back(proj.at(y, x));
      }
  return s;
}

std::pair<double, double> least_squares_warm_start(const FitSamples& s) {
  const size_t n = s.d.size();
  double sd = 0, sp = 0, sdd = 0, sdp = 0;
  for (size_t i = 0; i < n; ++i) {
    sd += s.d[i];
    sp += s.p[i];
    sdd += s.d[i] * s.d[i];
    sdp += s.d[i] * s.p[i];
  }
  const double det = n * sdd - sd * sd;
  if (std::abs(det) < 1e-12) return {1.0, 0.0};
  double a = (n * sdp - sd * sp) / det;
  double b = (sp * sdd - sd * sdp) / det;
  if (a < 1e-4) {  // degenerate or negative scale: keep shift-only fit
    a = 1e-4;
    b = (sp - a * sd) / n;
  }
  return {a, b};
}

// Huber-smoothed L1 on residual r = a*d + b - p, a = exp(la).
std::pair<double, double> refine_huber(const FitSamples& s, double a0, double b0,
                                       const ScaffoldConfig& cfg) {
  double la = std::log(std::max(a0, 1e-6)), b = b0;
  const double n = static_cast<double>(s.d.size());
  for (int it = 0; it < cfg.fit_steps; ++it) {
    const double lr =
        cfg.fit_lr * 0.5 * (1.0 + std::cos(M_PI * it / std::max(1, cfg.fit_steps)));
    const double a = std::exp(la);
    double gla = 0, gb = 0;
    for (size_t i = 0; i < s.d.size(); ++i) {
      const double r = a * s.d[i] + b - s.p[i];
      const double w = std::abs(r) <= cfg.huber_delta
                           ? r / cfg.huber_delta
                           : (r > 0 ? 1.0 : -1.0);
      gla += w * a * s.d[i];
      gb += w;
    }
    la -= lr * gla / n;
    b -= lr * gb / n * cfg.huber_delta;  // keep the two step sizes comparable
  }
  return {std::exp(la), b};
}

double masked_l1(const FitSamples& s, double a, double b) {
  double sum = 0;
  for (size_t i = 0; i < s.d.size(); ++i) sum += std::abs(a * s.d[i] + b - s.p[i]);
  return sum;
}

}  // namespace

std::pair<double, double> fit_global_affine(const Image& depth, const Image& proj,
                                            const Image& mask,
                                            const ScaffoldConfig& cfg) {
  const FitSamples s = gather_samples(depth, proj, mask);
  if (static_cast<int>(s.d.size()) < cfg.min_overlap_pixels)
    throw AlignmentError("fit_global_affine: insufficient overlap (" +
                         std::to_string(s.d.size()) + " px)");
  auto [a, b] = least_squares_warm_start(s);
  auto [ar, br] = refine_huber(s, a, b, cfg);
  // Objective monotonicity guard: never return worse than identity or the
  // warm start under the exact L1 objective.
  struct Cand {
    double a, b;
  } cands[] = {{ar, br}, {a, b}, {1.0, 0.0}};
  double best = std::numeric_limits<double>::infinity();
  std::pair<double, double> out{1.0, 0.0};
  for (const auto& cdt : cands) {
    const double v = masked_l1(s, cdt.a, cdt.b);
    if (v < best) {
      best = v;
      out = {cdt.a, cdt.b};
    }
  }
  return out;
}

Image compute_overlap_mask(const Image& depth, const ProjectedDepth& proj,
                           const std::pair<double, double>& params,
                           const ScaffoldConfig& cfg) {
  Image m(depth.h, depth.w, 1);
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x) {
      if (proj.hit.at(y, x) == 0.0 || depth.at(y, x) <= 0) continue;
      const double adj = params.first * depth.at(y, x) + params.second;
      const double p = proj.depth.at(y, x);
      if (p > 0 && std::abs(adj - p) / p < cfg.overlap_rel_tol) m.at(y, x) = 1.0;
    }
  return m;
}

PlaneSegmentation segment_planes(const Image& depth, const Image& normal,
                                 const Intrinsics& K, const ScaffoldConfig& cfg) {
  const int h = depth.h, w = depth.w;
  PlaneSegmentation seg;
  seg.labels = Image(h, w, 1, -1.0);

  // Pixel embeddings: unit normal + plane offset d = n . x_cam.
  struct Emb {
    Eigen::Vector3d n;
    double d;
    int y, x;
  };
  std::vector<Emb> pix;
  pix.reserve(static_cast<size_t>(h) * w);
  std::vector<int> pix_index(static_cast<size_t>(h) * w, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double z = depth.at(y, x);
      Eigen::Vector3d n(normal.at(y, x, 0), normal.at(y, x, 1), normal.at(y, x, 2));
      if (z <= 0 || n.squaredNorm() < 0.5) continue;
      n.normalize();
      const Eigen::Vector3d p((x - K.cx) / K.fx * z, (y - K.cy) / K.fy * z, z);
      pix_index[static_cast<size_t>(y) * w + x] = static_cast<int>(pix.size());
      pix.push_back({n, n.dot(p), y, x});
    }
  if (pix.empty()) return seg;

  const double cos_bw = std::cos(cfg.bandwidth_normal_deg * M_PI / 180.0);
  const double bw_d = cfg.bandwidth_offset;
  auto in_band = [&](const Eigen::Vector3d& n, double d, const Emb& e) {
    return n.dot(e.n) >= cos_bw && std::abs(d - e.d) <= bw_d;
  };

  // Mean shift from a subsampled anchor grid with a flat kernel.
  struct Mode {
    Eigen::Vector3d n;
    double d;
  };
  std::vector<Mode> modes;
  for (int y = 0; y < h; y += cfg.anchor_stride)
    for (int x = 0; x < w; x += cfg.anchor_stride) {
      const int pi = pix_index[static_cast<size_t>(y) * w + x];
      if (pi < 0) continue;
      Eigen::Vector3d n = pix[pi].n;
      double d = pix[pi].d;
      for (int it = 0; it < 30; ++it) {
        Eigen::Vector3d sn = Eigen::Vector3d::Zero();
        double sd = 0;
        int cnt = 0;
        for (const auto& e : pix)
          if (in_band(n, d, e)) {
            sn += e.n;
            sd += e.d;
            ++cnt;
          }
        if (cnt == 0) break;
        const Eigen::Vector3d nn = sn.normalized();
        const double nd = sd / cnt;
        const double shift = (nn - n).norm() + std::abs(nd - d);
        n = nn;
        d = nd;
        if (shift < 1e-6) break;
      }
      // Merge with an existing mode if within half a bandwidth.
      bool merged = false;
      for (auto& m : modes)
        if (m.n.dot(n) >= std::cos(0.5 * std::acos(std::min(1.0, cos_bw))) &&
            std::abs(m.d - d) <= 0.5 * bw_d) {
          merged = true;
          break;
        }
      if (!merged) modes.push_back({n, d});
    }

  if (modes.empty()) return seg;

  // Assign every pixel to the nearest converged mode within the bandwidth.
  std::vector<int> label(pix.size(), -1);
  std::vector<int> count(modes.size(), 0);
  for (size_t i = 0; i < pix.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int bm = -1;
    for (size_t m = 0; m < modes.size(); ++m) {
      if (!in_band(modes[m].n, modes[m].d, pix[i])) continue;
      const double dist =
          (1.0 - modes[m].n.dot(pix[i].n)) + std::abs(modes[m].d - pix[i].d) / bw_d;
      if (dist < best) {
        best = dist;
        bm = static_cast<int>(m);
      }
    }
    label[i] = bm;
    if (bm >= 0) ++count[bm];
  }

  // Drop small clusters, renumber survivors.
  const int min_px = std::max(1, static_cast<int>(cfg.min_plane_frac * h * w));
  std::vector<int> remap(modes.size(), -1);
  int next = 0;
  for (size_t m = 0; m < modes.size(); ++m)
    if (count[m] >= min_px) remap[m] = next++;
  seg.planes.resize(next);

  // Per-plane least-squares refit: centroid + smallest-eigenvector normal.
  std::vector<Eigen::Vector3d> centroid(next, Eigen::Vector3d::Zero());
  std::vector<Eigen::Matrix3d> scatter(next, Eigen::Matrix3d::Zero());
  std::vector<int> n_mem(next, 0);
  std::vector<Eigen::Vector3d> pts(pix.size());
  for (size_t i = 0; i < pix.size(); ++i) {
    const double z = depth.at(pix[i].y, pix[i].x);
    pts[i] = Eigen::Vector3d((pix[i].x - K.cx) / K.fx * z,
                             (pix[i].y - K.cy) / K.fy * z, z);
    const int m = label[i] >= 0 ? remap[label[i]] : -1;
    if (m < 0) continue;
    seg.labels.at(pix[i].y, pix[i].x) = m;
    centroid[m] += pts[i];
    ++n_mem[m];
  }
  for (int m = 0; m < next; ++m)
    if (n_mem[m] > 0) centroid[m] /= n_mem[m];
  for (size_t i = 0; i < pix.size(); ++i) {
    const int m = label[i] >= 0 ? remap[label[i]] : -1;
    if (m < 0) continue;
    const Eigen::Vector3d r = pts[i] - centroid[m];
    scatter[m] += r * r.transpose();
  }
  for (int m = 0; m < next; ++m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter[m]);
    Eigen::Vector3d n = es.eigenvectors().col(0);
    // Orient toward the camera (origin in camera frame).
    if (n.dot(-centroid[m]) < 0) n = -n;
    seg.planes[m].normal = n;
    seg.planes[m].offset = n.dot(centroid[m]);
    seg.planes[m].pixel_count = n_mem[m];
  }
  return seg;
}

AffineDepthParams fit_plane_affine(const Image& depth, const PlaneSegmentation& seg,
                                   const std::pair<double, double>& global_params,
                                   const Image& proj, const Image& mask,
                                   const ScaffoldConfig& cfg) {
  AffineDepthParams out;
  out.scale = global_params.first;
  out.shift = global_params.second;
  const int n_planes = static_cast<int>(seg.planes.size());
  std::vector<FitSamples> per(n_planes);
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x) {
      const int p = static_cast<int>(seg.labels.at(y, x));
      if (p < 0 || mask.at(y, x) == 0.0) continue;
      per[p].d.push_back(depth.at(y, x));
      per[p].p.push_back(proj.at(y, x));
    }
#pragma omp parallel for schedule(dynamic)
  for (int p = 0; p < n_planes; ++p) {
    std::pair<double, double> params = global_params;
    if (static_cast<int>(per[p].d.size()) >= cfg.min_overlap_pixels) {
      auto [a, b] = refine_huber(per[p], global_params.first, global_params.second, cfg);
      // Also consider a plane-local least-squares solution; pick whichever
      // has the lower restricted L1, never worse than the global params.
      auto ls = least_squares_warm_start(per[p]);
      auto [a2, b2] = refine_huber(per[p], ls.first, ls.second, cfg);
      struct Cand {
        double a, b;
      } cands[] = {{a, b}, {a2, b2}, {ls.first, ls.second}, {global_params.first, global_params.second}};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& cdt : cands) {
        const double v = masked_l1(per[p], cdt.a, cdt.b);
        if (v < best) {
          best = v;
          params = {cdt.a, cdt.b};
        }
      }
    }
#pragma omp critical
    out.per_plane[p] = params;
  }
  return out;
}

void merge_frame(PlaneScaffold& scaffold, const Image& depth,
                 const AffineDepthParams& params, const PlaneSegmentation& seg,
                 const Pose& pose, const Intrinsics& K, const Image& overlap,
                 int frame_index) {
  const Eigen::Matrix3d Rcw = pose.R.transpose();
  const Eigen::Vector3d cam = pose.center();
  for (int y = 0; y < depth.h; ++y)
    for (int x = 0; x < depth.w; ++x) {
      const int p = static_cast<int>(seg.labels.at(y, x));
      if (p < 0 || overlap.at(y, x) != 0.0) continue;
      const double d = depth.at(y, x);
      if (d <= 0) continue;
      const auto it = params.per_plane.find(p);
      const double a = it != params.per_plane.end() ? it->second.first : params.scale;
      const double b = it != params.per_plane.end() ? it->second.second : params.shift;
      const double adj = a * d + b;
      if (adj <= 0) continue;
      const Eigen::Vector3d pc((x - K.cx) / K.fx * adj, (y - K.cy) / K.fy * adj, adj);
      const Eigen::Vector3d pw = Rcw * pc + cam;
      Eigen::Vector3d nw = Rcw * seg.planes[p].normal;
      if (nw.dot(cam - pw) < 0) nw = -nw;
      scaffold.points.push_back(pw);
      scaffold.normals.push_back(nw.normalized());
      scaffold.source.push_back({static_cast<uint16_t>(frame_index),
                                 static_cast<uint16_t>(p)});
    }
}

PlaneScaffold assemble(const std::vector<CaptureFrame>& frames,
                       const ScaffoldConfig& cfg, bool align) {
  if (frames.empty()) throw ValidationError("assemble: need at least one frame");
  PlaneScaffold scaffold;

  // Frame 0 fixes the reference scale: back-project wholesale.
  {
    const CaptureFrame& fr = frames[0];
    const PlaneSegmentation seg = segment_planes(fr.depth, fr.normal, fr.K, cfg);
    const Eigen::Matrix3d Rcw = fr.pose.R.transpose();
    const Eigen::Vector3d cam = fr.pose.center();
    for (int y = 0; y < fr.depth.h; ++y)
      for (int x = 0; x < fr.depth.w; ++x) {
        const double d = fr.depth.at(y, x);
        if (d <= 0) continue;
        const Eigen::Vector3d pc((x - fr.K.cx) / fr.K.fx * d,
                                 (y - fr.K.cy) / fr.K.fy * d, d);
        const Eigen::Vector3d pw = Rcw * pc + cam;
        const int p = static_cast<int>(seg.labels.at(y, x));
        Eigen::Vector3d nc;
        if (p >= 0) {
          nc = seg.planes[p].normal;
        } else {
          nc = Eigen::Vector3d(fr.normal.at(y, x, 0), fr.normal.at(y, x, 1),
                               fr.normal.at(y, x, 2));
          if (nc.squaredNorm() < 0.5) continue;
        }
        Eigen::Vector3d nw = Rcw * nc.normalized();
        if (nw.dot(cam - pw) < 0) nw = -nw;
        scaffold.points.push_back(pw);
        scaffold.normals.push_back(nw.normalized());
        scaffold.source.push_back(
            {0, p >= 0 ? static_cast<uint16_t>(p) : kNoPlane});
      }
  }

  std::pair<double, double> prev_params{1.0, 0.0};
  for (size_t t = 1; t < frames.size(); ++t) {
    const CaptureFrame& fr = frames[t];
    const int h = fr.depth.h, w = fr.depth.w;
    const ProjectedDepth proj = project_points(scaffold.points, fr.pose, fr.K, h, w);

    std::pair<double, double> global_params{1.0, 0.0};
    Image overlap(h, w, 1);
    if (align) {
      // Initial mask: scaffold hit and valid depth; warm-start fit; then the
      // relative-agreement overlap mask is recomputed once and the fit redone.
      Image m0(h, w, 1);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (proj.hit.at(y, x) != 0.0 && fr.depth.at(y, x) > 0) m0.at(y, x) = 1.0;
      std::pair<double, double> warm = prev_params;
      try {
        warm = fit_global_affine(fr.depth, proj.depth, m0, cfg);
      } catch (const AlignmentError&) {
        if (t == 1) throw AlignmentError("assemble: frame 1 has no overlap with frame 0");
        // Fall back to the previous frame's parameters.
      }
      overlap = compute_overlap_mask(fr.depth, proj, warm, cfg);
      try {
        global_params = fit_global_affine(fr.depth, proj.depth, overlap, cfg);
      } catch (const AlignmentError&) {
        global_params = warm;
      }
      overlap = compute_overlap_mask(fr.depth, proj, global_params, cfg);
      prev_params = global_params;
    } else {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (proj.hit.at(y, x) != 0.0 && fr.depth.at(y, x) > 0)
            overlap.at(y, x) = 1.0;
    }

    const PlaneSegmentation seg = segment_planes(fr.depth, fr.normal, fr.K, cfg);
    AffineDepthParams params;
    if (align) {
      params = fit_plane_affine(fr.depth, seg, global_params, proj.depth, overlap, cfg);
    } else {
      params.scale = 1.0;
      params.shift = 0.0;
      for (size_t p = 0; p < seg.planes.size(); ++p)
        params.per_plane[static_cast<int>(p)] = {1.0, 0.0};
    }
    merge_frame(scaffold, fr.depth, params, seg, fr.pose, fr.K, overlap,
                static_cast<int>(t));
  }
  return scaffold;
}

PlaneScaffold downsample_scaffold(const PlaneScaffold& scaffold, double voxel_size) {
  if (voxel_size <= 0) throw ValidationError("downsample_scaffold: voxel_size must be > 0");
  struct Best {
    double dist;
    size_t idx;
  };
  // Exact voxel index triple as the key (a lossy hash could merge voxels).
  std::map<std::array<int64_t, 3>, Best> voxels;
  auto key = [&](const Eigen::Vector3d& p) {
    return std::array<int64_t, 3>{
        static_cast<int64_t>(std::floor(p.x() / voxel_size)),
        static_cast<int64_t>(std::floor(p.y() / voxel_size)),
        static_cast<int64_t>(std::floor(p.z() / voxel_size))};
  };
  auto centroid_of = [&](const Eigen::Vector3d& p) {
    return Eigen::Vector3d((std::floor(p.x() / voxel_size) + 0.5) * voxel_size,
                           (std::floor(p.y() / voxel_size) + 0.5) * voxel_size,
                           (std::floor(p.z() / voxel_size) + 0.5) * voxel_size);
  };
  for (size_t i = 0; i < scaffold.points.size(); ++i) {
    const double dist = (scaffold.points[i] - centroid_of(scaffold.points[i])).norm();
    const auto k = key(scaffold.points[i]);
    auto it = voxels.find(k);
    if (it == voxels.end() || dist < it->second.dist) voxels[k] = {dist, i};
  }
  std::vector<size_t> keep;
  keep.reserve(voxels.size());
  for (const auto& [k, b] : voxels) keep.push_back(b.idx);
  std::sort(keep.begin(), keep.end());  // stable output order
  PlaneScaffold out;
  for (size_t i : keep) {
    out.points.push_back(scaffold.points[i]);
    out.normals.push_back(scaffold.normals[i]);
    out.source.push_back(scaffold.source[i]);
  }
  return out;
}

}  // namespace panosplat
