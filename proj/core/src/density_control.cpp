#include <algorithm>
#include <cmath>
#include <set>

#include "panosplat/errors.hpp"
#include "panosplat/train.hpp"

namespace panosplat {

void DensifyConfig::validate() const {
  if (densify_until > total_iters)
    throw ValidationError("densify.densify_until: must be <= total_iters");
  if (stable_opacity_threshold <= 0 || stable_opacity_threshold >= 1)
    throw ValidationError("densify.stable_opacity_threshold: must be in (0,1)");
  if (densify_interval <= 0)
    throw ValidationError("densify.densify_interval: must be > 0");
  if (grad_threshold < 0)
    throw ValidationError("densify.grad_threshold: must be >= 0");
}

void CloudOptState::init(size_t n) {
  mu.init(n);
  rot.init(n);
  log_scale.init(n);
  opacity.init(n);
  sh_dc.init(n);
  sh_rest.init(n);
}

void CloudOptState::erase(const std::vector<size_t>& sorted_rows) {
  mu.erase_rows(sorted_rows);
  rot.erase_rows(sorted_rows);
  log_scale.erase_rows(sorted_rows);
  opacity.erase_rows(sorted_rows);
  sh_dc.erase_rows(sorted_rows);
  sh_rest.erase_rows(sorted_rows);
}

void CloudOptState::append(size_t rows) {
  mu.append_zero_rows(rows);
  rot.append_zero_rows(rows);
  log_scale.append_zero_rows(rows);
  opacity.append_zero_rows(rows);
  sh_dc.append_zero_rows(rows);
  sh_rest.append_zero_rows(rows);
}

std::vector<size_t> oversized_prune_set(const GaussianCloud& cloud,
                                        const std::vector<double>& max_radius_px,
                                        const DensifyConfig& cfg, double extent,
                                        bool stable) {
  const double world_thr = cfg.size_threshold_world_frac * extent;
  std::vector<size_t> out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const double max_scale = std::exp(cloud.log_scale[i].maxCoeff());
    const double radius = i < max_radius_px.size() ? max_radius_px[i] : 0.0;
    const bool oversized =
        max_scale > world_thr || radius > cfg.size_threshold_screen;
    if (!oversized) continue;
    if (stable &&
        sigmoid(cloud.opacity_logit[i]) > cfg.stable_opacity_threshold)
      continue;  // high-confidence: retained
    out.push_back(i);
  }
  return out;
}

DensifyReport densify_and_prune(GaussianCloud& cloud, CloudOptState* opt,
                                const std::vector<double>& mean_abs_grad,
                                const std::vector<double>& max_radius_px,
                                const DensifyConfig& cfg, double extent,
                                int cycle_index, bool stable, Rng& rng) {
  cfg.validate();
  DensifyReport rep;
  const size_t n0 = cloud.size();
  const double dense_thr = cfg.percent_dense * extent;

  // (a) Clone small / split large high-gradient Gaussians.
  GaussianCloud added;
  std::vector<size_t> split_parents;
  for (size_t i = 0; i < n0; ++i) {
    if (mean_abs_grad[i] <= cfg.grad_threshold) continue;
    const double max_scale = std::exp(cloud.log_scale[i].maxCoeff());
    if (max_scale <= dense_thr) {
      // Clone: exact copy; positions diverge through optimization.
      added.mu.push_back(cloud.mu[i]);
      added.rot.push_back(cloud.rot[i]);
      added.log_scale.push_back(cloud.log_scale[i]);
      added.opacity_logit.push_back(cloud.opacity_logit[i]);
      added.sh_dc.push_back(cloud.sh_dc[i]);
      added.sh_rest.push_back(cloud.sh_rest[i]);
      ++rep.cloned;
    } else {
      // Split: two children sampled from the parent, scales shrunk.
      const Eigen::Matrix3d R = quat_to_rot(cloud.rot[i]);
      for (int c = 0; c < 2; ++c) {
        Eigen::Vector3d local;
        for (int k = 0; k < 3; ++k)
          local[k] = rng.normal() * std::exp(cloud.log_scale[i][k]);
        added.mu.push_back(cloud.mu[i] + R * local);
        added.rot.push_back(cloud.rot[i]);
        added.log_scale.push_back(cloud.log_scale[i].array() -
                                  std::log(cfg.split_scale_factor));
        added.opacity_logit.push_back(cloud.opacity_logit[i]);
        added.sh_dc.push_back(cloud.sh_dc[i]);
        added.sh_rest.push_back(cloud.sh_rest[i]);
      }
      split_parents.push_back(i);
      ++rep.split;
    }
  }
  cloud.append(added);
  if (opt) opt->append(added.size());

  // (b) + (c): low-opacity prune everywhere, opacity-gated oversized prune.
  std::vector<double> radius_ext = max_radius_px;
  radius_ext.resize(cloud.size(), 0.0);
  std::set<size_t> prune(split_parents.begin(), split_parents.end());
  for (size_t i = 0; i < cloud.size(); ++i)
    if (sigmoid(cloud.opacity_logit[i]) < cfg.opacity_prune_floor) {
      if (prune.insert(i).second) ++rep.pruned_low_opacity;
    }
  size_t oversized_total = 0;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const double max_scale = std::exp(cloud.log_scale[i].maxCoeff());
    if (max_scale > cfg.size_threshold_world_frac * extent ||
        radius_ext[i] > cfg.size_threshold_screen)
      ++oversized_total;
  }
  const std::vector<size_t> over =
      oversized_prune_set(cloud, radius_ext, cfg, extent, stable);
  for (size_t i : over)
    if (prune.insert(i).second) ++rep.pruned_oversized;
  rep.kept_oversized = oversized_total - over.size();

  // Survivor flags for the reset exemption, in pre-erase indexing.
  std::vector<uint8_t> high_conf(cloud.size(), 0);
  if (stable) {
    for (size_t i = 0; i < cloud.size(); ++i) {
      const double max_scale = std::exp(cloud.log_scale[i].maxCoeff());
      const bool oversized =
          max_scale > cfg.size_threshold_world_frac * extent ||
          radius_ext[i] > cfg.size_threshold_screen;
      if (oversized && !prune.count(i) &&
          sigmoid(cloud.opacity_logit[i]) > cfg.stable_opacity_threshold)
        high_conf[i] = 1;
    }
  }

  std::vector<size_t> prune_sorted(prune.begin(), prune.end());
  std::vector<uint8_t> high_conf_kept;
  high_conf_kept.reserve(cloud.size() - prune_sorted.size());
  {
    size_t next = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
      if (next < prune_sorted.size() && prune_sorted[next] == i) {
        ++next;
        continue;
      }
      high_conf_kept.push_back(high_conf[i]);
    }
  }
  cloud.erase_indices(prune_sorted);
  if (opt) opt->erase(prune_sorted);

  // (d) Periodic opacity reset, skipping this cycle's stable survivors.
  if (cycle_index > 0 && cycle_index % cfg.opacity_reset_interval == 0) {
    rep.opacity_reset = true;
    const double cap = logit(0.01);
    for (size_t i = 0; i < cloud.size(); ++i)
      if (!high_conf_kept[i])
        cloud.opacity_logit[i] = std::min(cloud.opacity_logit[i], cap);
    if (opt) opt->opacity.init(cloud.size());
  }
  return rep;
}

std::vector<int> train_split(int frame_count, int test_every) {
  std::vector<int> out;
  for (int i = 0; i < frame_count; ++i)
    if (test_every <= 0 || (i + 1) % test_every != 0) out.push_back(i);
  return out;
}

std::vector<int> test_split(int frame_count, int test_every) {
  std::vector<int> out;
  if (test_every <= 0) return out;
  for (int i = 0; i < frame_count; ++i)
    if ((i + 1) % test_every == 0) out.push_back(i);
  return out;
}

double scene_extent(const PlaneScaffold& scaffold) {
  if (scaffold.points.empty()) return 1.0;
  Eigen::Vector3d lo = scaffold.points[0], hi = scaffold.points[0];
  for (const auto& p : scaffold.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return std::max(0.5 * (hi - lo).norm(), 1e-6);
}

}  // namespace panosplat
