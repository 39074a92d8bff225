#include "panosplat/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"

namespace panosplat {

void GaussianCloud::resize(size_t n) {
  mu.resize(n, Eigen::Vector3d::Zero());
  rot.resize(n, Eigen::Vector4d(1, 0, 0, 0));
  log_scale.resize(n, Eigen::Vector3d::Zero());
  opacity_logit.resize(n, 0.0);
  sh_dc.resize(n, Eigen::Vector3d::Zero());
  sh_rest.resize(n, Eigen::Matrix3d::Zero());
}

void GaussianCloud::erase_indices(const std::vector<size_t>& sorted_indices) {
  if (sorted_indices.empty()) return;
  size_t write = 0, drop = 0;
  for (size_t i = 0; i < size(); ++i) {
    if (drop < sorted_indices.size() && sorted_indices[drop] == i) {
      ++drop;
      continue;
    }
    mu[write] = mu[i];
    rot[write] = rot[i];
    log_scale[write] = log_scale[i];
    opacity_logit[write] = opacity_logit[i];
    sh_dc[write] = sh_dc[i];
    sh_rest[write] = sh_rest[i];
    ++write;
  }
  resize(write);
}

void GaussianCloud::append(const GaussianCloud& other) {
  mu.insert(mu.end(), other.mu.begin(), other.mu.end());
  rot.insert(rot.end(), other.rot.begin(), other.rot.end());
  log_scale.insert(log_scale.end(), other.log_scale.begin(), other.log_scale.end());
  opacity_logit.insert(opacity_logit.end(), other.opacity_logit.begin(),
                       other.opacity_logit.end());
  sh_dc.insert(sh_dc.end(), other.sh_dc.begin(), other.sh_dc.end());
  sh_rest.insert(sh_rest.end(), other.sh_rest.begin(), other.sh_rest.end());
}

bool GaussianCloud::finite() const {
  for (size_t i = 0; i < size(); ++i) {
    if (!mu[i].allFinite() || !rot[i].allFinite() || !log_scale[i].allFinite() ||
        !std::isfinite(opacity_logit[i]) || !sh_dc[i].allFinite() ||
        !sh_rest[i].allFinite())
      return false;
  }
  return true;
}

uint64_t GaussianCloud::checksum() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, size_t n) {
    h ^= fnv1a64(p, n);
    h *= 0x100000001b3ULL;
  };
  for (size_t i = 0; i < size(); ++i) {
    mix(mu[i].data(), 3 * sizeof(double));
    mix(rot[i].data(), 4 * sizeof(double));
    mix(log_scale[i].data(), 3 * sizeof(double));
    mix(&opacity_logit[i], sizeof(double));
    mix(sh_dc[i].data(), 3 * sizeof(double));
    mix(sh_rest[i].data(), 9 * sizeof(double));
  }
  return h;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::Matrix3d covariance_from_qs(const Eigen::Vector4d& q,
                                   const Eigen::Vector3d& log_scale) {
  const Eigen::Matrix3d R = quat_to_rot(q);
  const Eigen::Vector3d s2 = (2.0 * log_scale).array().exp();
  return R * s2.asDiagonal() * R.transpose();
}

std::vector<double> knn_mean_distance(const std::vector<Eigen::Vector3d>& points,
                                      int k) {
  const int n = static_cast<int>(points.size());
  if (n < k + 1)
    throw ValidationError("knn_mean_distance: need at least k+1 points");

  // Uniform grid; cell size from the bounding box so occupancy stays sane.
  Eigen::Vector3d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d ext = (hi - lo).cwiseMax(1e-12);
  const double cell =
      std::max(1e-12, std::cbrt(ext.prod() / n) * std::cbrt(double(k + 1)));
  std::map<std::array<int64_t, 3>, std::vector<int>> grid;
  auto cell_of = [&](const Eigen::Vector3d& p) {
    return std::array<int64_t, 3>{
        static_cast<int64_t>(std::floor((p.x() - lo.x()) / cell)),
        static_cast<int64_t>(std::floor((p.y() - lo.y()) / cell)),
        static_cast<int64_t>(std::floor((p.z() - lo.z()) / cell))};
  };
  for (int i = 0; i < n; ++i) grid[cell_of(points[i])].push_back(i);

  std::vector<double> out(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (int i = 0; i < n; ++i) {
    const auto c = cell_of(points[i]);
    std::vector<double> best;  // k smallest squared distances
    // Expand rings until the kth distance is guaranteed covered.
    for (int ring = 0;; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
              continue;
            const auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
            if (it == grid.end()) continue;
            for (int j : it->second) {
              if (j == i) continue;
              const double d2 = (points[i] - points[j]).squaredNorm();
              if (static_cast<int>(best.size()) < k) {
                best.push_back(d2);
                std::push_heap(best.begin(), best.end());
              } else if (d2 < best.front()) {
                std::pop_heap(best.begin(), best.end());
                best.back() = d2;
                std::push_heap(best.begin(), best.end());
              }
            }
          }
      // Any point within Euclidean distance d lies within Chebyshev cell
      // distance floor(d/cell)+1, so rings 0..ring cover d <= (ring-1)*cell.
      if (static_cast<int>(best.size()) == k && ring >= 1) {
        const double guaranteed = (ring - 1) * cell;
        if (best.front() <= guaranteed * guaranteed) break;
      }
      // Safety stop: the whole grid has been scanned.
      if (ring > 2 + static_cast<int>(std::ceil(ext.maxCoeff() / cell))) break;
    }
    double sum = 0;
    for (double d2 : best) sum += std::sqrt(d2);
    out[i] = sum / k;
  }
  return out;
}

GaussianCloud init_from_scaffold(const PlaneScaffold& scaffold, int k,
                                 double flatten_eps,
                                 const std::vector<CaptureFrame>* frames) {
  if (scaffold.size() == 0)
    throw ValidationError("init_from_scaffold: empty scaffold");
  const std::vector<double> sigma = knn_mean_distance(scaffold.points, k);

  GaussianCloud cloud;
  cloud.resize(scaffold.size());
  for (size_t i = 0; i < scaffold.size(); ++i) {
    const Eigen::Vector3d& n = scaffold.normals[i];
    cloud.mu[i] = scaffold.points[i];

    // Local frame: z = normal; x = world-x projected into the plane, falling
    // back to world-y near degeneracy. Deterministic in-plane orientation.
    Eigen::Vector3d x_axis =
        Eigen::Vector3d::UnitX() - n * n.dot(Eigen::Vector3d::UnitX());
    if (x_axis.norm() < 1e-6)
      x_axis = Eigen::Vector3d::UnitY() - n * n.dot(Eigen::Vector3d::UnitY());
    x_axis.normalize();
    const Eigen::Vector3d y_axis = n.cross(x_axis);
    Eigen::Matrix3d R;
    R.col(0) = x_axis;
    R.col(1) = y_axis;
    R.col(2) = n;
    cloud.rot[i] = rot_to_quat(R);

    const double s = std::max(sigma[i], 1e-9);
    cloud.log_scale[i] =
        Eigen::Vector3d(std::log(s), std::log(s), std::log(flatten_eps * s));
    cloud.opacity_logit[i] = logit(0.1);

    Eigen::Vector3d color(0.5, 0.5, 0.5);
    if (frames && !frames->empty()) {
      // Sample the view whose camera center is nearest; fall back to mid-gray
      // when the point does not project into it.
      double best = std::numeric_limits<double>::infinity();
      const CaptureFrame* bf = nullptr;
      for (const auto& fr : *frames) {
        const double d = (fr.pose.center() - cloud.mu[i]).squaredNorm();
        if (d < best) {
          best = d;
          bf = &fr;
        }
      }
      if (bf) {
        const Eigen::Vector3d pc = bf->pose.to_camera(cloud.mu[i]);
        if (pc.z() > 0) {
          const int u = static_cast<int>(std::lround(bf->K.fx * pc.x() / pc.z() + bf->K.cx));
          const int v = static_cast<int>(std::lround(bf->K.fy * pc.y() / pc.z() + bf->K.cy));
          if (u >= 0 && u < bf->image.w && v >= 0 && v < bf->image.h)
            color = Eigen::Vector3d(bf->image.at(v, u, 0), bf->image.at(v, u, 1),
                                    bf->image.at(v, u, 2));
        }
      }
    }
    cloud.sh_dc[i] = (color.array() - 0.5) / kShC0;
  }
  return cloud;
}

}  // namespace panosplat
