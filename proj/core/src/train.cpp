#include "panosplat/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "panosplat/errors.hpp"
#include "panosplat/metrics.hpp"

namespace panosplat {

namespace {

double* flat(std::vector<Eigen::Vector3d>& v) {
  return v.empty() ? nullptr : v[0].data();
}
double* flat(std::vector<Eigen::Vector4d>& v) {
  return v.empty() ? nullptr : v[0].data();
}
double* flat(std::vector<Eigen::Matrix3d>& v) {
  return v.empty() ? nullptr : v[0].data();
}
void renormalize(GaussianCloud& cloud) {
  for (auto& q : cloud.rot) {
    const double n = q.norm();
    if (n > 0) q /= n;
  }
}

/// Per-frame Adam state for the correction parameters.
struct CorrectionOpt {
  AdamGroup q{4}, t{3}, w{3}, b{3};
  CorrectionOpt() {
    q.init(1);
    t.init(1);
    w.init(1);
    b.init(1);
  }
};

void check_finite_loss(double value, const char* term, int iter) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "train: non-finite " << term << " loss at iteration " << iter;
    throw RenderError(os.str());
  }
}

}  // namespace

TrainResult train(const CaptureBundle& bundle, const PlaneScaffold& scaffold,
                  const TrainOptions& opt) {
  opt.densify.validate();
  opt.weights.validate();
  if (bundle.frames.empty()) throw ValidationError("train: empty bundle");
  if (scaffold.points.empty()) throw ValidationError("train: empty scaffold");
  const auto wall0 = std::chrono::steady_clock::now();

  const int frame_count = static_cast<int>(bundle.frames.size());
  const std::vector<int> train_idx = train_split(frame_count, opt.test_every);
  if (train_idx.empty()) throw ValidationError("train: no training frames");

  std::vector<CaptureFrame> train_frames;
  for (int f : train_idx) train_frames.push_back(bundle.frames[f]);

  TrainResult res;
  res.cloud =
      init_from_scaffold(scaffold, opt.knn_k, opt.flatten_eps, &train_frames);
  res.corrections.residual.assign(frame_count, ResidualPose{});
  res.corrections.tone.assign(frame_count, ToneParams{});

  const double extent = scene_extent(scaffold);
  CloudOptState copt;
  copt.init(res.cloud.size());
  std::vector<CorrectionOpt> corr_opt(frame_count);

  std::vector<double> grad_accum(res.cloud.size(), 0.0);
  std::vector<int> grad_denom(res.cloud.size(), 0);
  std::vector<double> max_radius(res.cloud.size(), 0.0);

  Rng sched_rng(mix_seed(opt.seed, 0x5c4ed));
  Rng densify_rng(mix_seed(opt.seed, 0xdc5));
  std::vector<int> schedule;
  size_t sched_pos = 0;
  auto next_frame = [&]() {
    if (sched_pos >= schedule.size()) {
      schedule = train_idx;
      for (size_t i = schedule.size(); i > 1; --i)
        std::swap(schedule[i - 1], schedule[sched_rng.uniform_int(i)]);
      sched_pos = 0;
    }
    return schedule[sched_pos++];
  };

  TrainCheckpoint last{};
  auto pose_err_deg = [&]() {
    double sum = 0;
    for (int f : train_idx) {
      const Pose adj = Pose::compose(res.corrections.residual[f].as_pose(),
                                     bundle.frames[f].pose);
      sum += rotation_angle(adj.R * bundle.gt_frames[f].pose.R.transpose());
    }
    return sum / train_idx.size() * 180.0 / M_PI;
  };

  for (int iter = 1; iter <= opt.densify.total_iters; ++iter) {
    const int f = next_frame();
    const CaptureFrame& frame = bundle.frames[f];
    ResidualPose& residual = res.corrections.residual[f];
    ToneParams& tone = res.corrections.tone[f];

    RenderCache cache;
    const RenderOutput ro = render(res.cloud, frame.pose, &residual, frame.K,
                                   frame.image.h, frame.image.w, &tone, &cache);

    const ColorLoss cl = loss_color(ro.color, frame.image, opt.weights);
    check_finite_loss(cl.value, "color", iter);
    const GeometricLoss gl =
        loss_geometric(ro.normal, ro.depth, frame.normal, cache.adjusted_pose,
                       frame.K, res.cloud, opt.weights);
    check_finite_loss(gl.value, "geometric", iter);

    Gradients g = backward(res.cloud, cache, cl.d_image, gl.d_depth,
                           gl.d_normal, &gl.d_R_adjusted);
    for (size_t i = 0; i < res.cloud.size(); ++i)
      g.d_log_scale[i] += gl.d_log_scale[i];

    // Densification statistics (AbsGS accumulation).
    for (size_t i = 0; i < res.cloud.size(); ++i) {
      if (ro.stats.pixel_count[i] > 0) {
        grad_accum[i] += g.abs_grad[i];
        ++grad_denom[i];
      }
      max_radius[i] = std::max(max_radius[i], ro.stats.max_radius_px[i]);
    }

    // Parameter updates.
    const size_t n = res.cloud.size();
    const double t_frac =
        static_cast<double>(iter) / opt.densify.total_iters;
    const double mu_lr = extent * opt.lr.mu_init *
                         std::pow(opt.lr.mu_final / opt.lr.mu_init, t_frac);
    copt.mu.step(flat(res.cloud.mu), flat(g.d_mu), n, mu_lr);
    copt.rot.step(flat(res.cloud.rot), flat(g.d_rot), n, opt.lr.rot);
    copt.log_scale.step(flat(res.cloud.log_scale), flat(g.d_log_scale), n,
                        opt.lr.scale);
    copt.opacity.step(res.cloud.opacity_logit.data(),
                      g.d_opacity_logit.data(), n, opt.lr.opacity);
    copt.sh_dc.step(flat(res.cloud.sh_dc), flat(g.d_sh_dc), n, opt.lr.sh);
    copt.sh_rest.step(flat(res.cloud.sh_rest), flat(g.d_sh_rest), n,
                      opt.lr.sh / 20.0);
    renormalize(res.cloud);

    const bool gauge_frame = f == train_idx.front();
    if (opt.optimize_pose && !gauge_frame) {
      corr_opt[f].q.step(residual.q.data(), g.d_res_q.data(), 1,
                         opt.lr.residual_q);
      corr_opt[f].t.step(residual.t.data(), g.d_res_t.data(), 1,
                         opt.lr.residual_t * extent);
      residual.q /= residual.q.norm();
    }
    if (opt.optimize_tone && !gauge_frame) {
      corr_opt[f].w.step(tone.w.data(), g.d_tone_w.data(), 1, opt.lr.tone);
      corr_opt[f].b.step(tone.b.data(), g.d_tone_b.data(), 1, opt.lr.tone);
    }

    // Density control.
    if (iter % opt.densify.densify_interval == 0 &&
        iter <= opt.densify.densify_until) {
      std::vector<double> mean_grad(n, 0.0);
      for (size_t i = 0; i < n; ++i)
        if (grad_denom[i] > 0) mean_grad[i] = grad_accum[i] / grad_denom[i];
      densify_and_prune(res.cloud, &copt, mean_grad, max_radius, opt.densify,
                        extent, iter / opt.densify.densify_interval,
                        opt.stable_pruning, densify_rng);
      grad_accum.assign(res.cloud.size(), 0.0);
      grad_denom.assign(res.cloud.size(), 0);
      max_radius.assign(res.cloud.size(), 0.0);
    }

    if (iter % opt.report_interval == 0 || iter == opt.densify.total_iters) {
      last.iter = iter;
      last.l1 = cl.l1;
      last.dssim = cl.dssim;
      last.geo = gl.value;
      last.loss = cl.value + gl.value;
      last.gaussian_count = res.cloud.size();
      last.mean_rot_err_deg = pose_err_deg();
      res.report.entries.push_back(last);
    }
  }

  res.report.wall_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0)
          .count();

  if (!opt.log_path.empty()) {
    std::ofstream os(opt.log_path);
    for (const auto& e : res.report.entries) {
      nlohmann::json j;
      j["iter"] = e.iter;
      j["loss"] = e.loss;
      j["l1"] = e.l1;
      j["dssim"] = e.dssim;
      j["geo"] = e.geo;
      j["gaussians"] = e.gaussian_count;
      j["rot_err_deg"] = e.mean_rot_err_deg;
      os << j.dump() << "\n";
    }
  }
  return res;
}

CorrectionState refine_test_views(const GaussianCloud& cloud,
                                  const std::vector<CaptureFrame>& test_frames,
                                  int iters, const TrainOptions& opt,
                                  double extent) {
  CorrectionState cs;
  cs.residual.assign(test_frames.size(), ResidualPose{});
  cs.tone.assign(test_frames.size(), ToneParams{});
  for (size_t fi = 0; fi < test_frames.size(); ++fi) {
    const CaptureFrame& frame = test_frames[fi];
    ResidualPose& residual = cs.residual[fi];
    ToneParams& tone = cs.tone[fi];
    CorrectionOpt copt;
    for (int it = 0; it < iters; ++it) {
      RenderCache cache;
      const RenderOutput ro =
          render(cloud, frame.pose, &residual, frame.K, frame.image.h,
                 frame.image.w, &tone, &cache);
      const ColorLoss cl = loss_color(ro.color, frame.image, opt.weights);
      check_finite_loss(cl.value, "refine color", it);
      const Gradients g = backward(cloud, cache, cl.d_image, {}, {});
      if (opt.optimize_pose) {
        copt.q.step(residual.q.data(), g.d_res_q.data(), 1, opt.lr.residual_q);
        copt.t.step(residual.t.data(), g.d_res_t.data(), 1,
                    opt.lr.residual_t * extent);
        residual.q /= residual.q.norm();
      }
      if (opt.optimize_tone) {
        copt.w.step(tone.w.data(), g.d_tone_w.data(), 1, opt.lr.tone);
        copt.b.step(tone.b.data(), g.d_tone_b.data(), 1, opt.lr.tone);
      }
    }
  }
  return cs;
}

}  // namespace panosplat
