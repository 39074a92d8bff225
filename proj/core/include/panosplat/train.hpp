#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "panosplat/adam.hpp"
#include "panosplat/cloud.hpp"
#include "panosplat/losses.hpp"
#include "panosplat/render.hpp"
#include "panosplat/rng.hpp"
#include "panosplat/scene_gen.hpp"

namespace panosplat {

struct DensifyConfig {
  double grad_threshold = 0.0008;  // mean abs view-space gradient (px)
  int densify_interval = 100;
  int densify_until = 1500;
  int total_iters = 3000;
  double percent_dense = 0.01;            // clone/split size split, x extent
  double size_threshold_world_frac = 0.1; // oversized world scale, x extent
  double size_threshold_screen = 20.0;    // oversized screen radius (px)
  double opacity_prune_floor = 0.005;
  double stable_opacity_threshold = 0.5;
  int opacity_reset_interval = 10;        // in densify cycles
  double split_scale_factor = 1.6;

  void validate() const;
};

struct LearningRates {
  double mu_init = 1.6e-4;   // x scene extent, exp decay to mu_final
  double mu_final = 1.6e-6;  // x scene extent
  double sh = 2.5e-3;
  double opacity = 0.05;
  double scale = 5e-3;
  double rot = 1e-3;
  double residual_q = 1e-4;
  double residual_t = 1e-4;  // x scene extent
  double tone = 1e-3;
};

struct CorrectionState {
  std::vector<ResidualPose> residual;  // per frame
  std::vector<ToneParams> tone;
};

struct TrainCheckpoint {
  int iter = 0;
  double loss = 0, l1 = 0, dssim = 0, geo = 0;
  size_t gaussian_count = 0;
  double mean_rot_err_deg = 0;  // adjusted vs ground-truth poses
};

struct TrainReport {
  std::vector<TrainCheckpoint> entries;
  double wall_sec = 0;  // not covered by determinism guarantees
};

struct TrainOptions {
  DensifyConfig densify;
  LossWeights weights;
  LearningRates lr;
  uint64_t seed = 1;
  bool optimize_pose = true;
  bool optimize_tone = true;
  bool stable_pruning = true;
  int knn_k = 3;
  double flatten_eps = 0.01;
  int report_interval = 100;
  int refine_iters = 300;  // test-view refinement steps per frame
  /// Held-out split: every test_every-th frame is a test view.
  int test_every = 8;
  /// Optional JSON-lines log sink (one line per report entry).
  std::filesystem::path log_path;
};

struct TrainResult {
  GaussianCloud cloud;
  CorrectionState corrections;  // training-frame corrections
  TrainReport report;
};

struct DensifyReport {
  size_t cloned = 0, split = 0;
  size_t pruned_low_opacity = 0, pruned_oversized = 0, kept_oversized = 0;
  bool opacity_reset = false;
};

/// The stable-pruning rule, exposed for property testing: indices that are
/// oversized (world scale or screen radius) AND have opacity <= the stable
/// threshold. With stable=false every oversized Gaussian is returned.
std::vector<size_t> oversized_prune_set(const GaussianCloud& cloud,
                                        const std::vector<double>& max_radius_px,
                                        const DensifyConfig& cfg, double extent,
                                        bool stable);

/// Per-Gaussian optimizer state mirrored through structural cloud edits.
struct CloudOptState {
  AdamGroup mu{3}, rot{4}, log_scale{3}, opacity{1}, sh_dc{3}, sh_rest{9};

  void init(size_t n);
  void erase(const std::vector<size_t>& sorted_rows);
  void append(size_t rows);
};

/// One density-control step: clone/split on mean absolute view-space
/// gradients, low-opacity prune, opacity-gated oversized prune, periodic
/// opacity reset (skipping this cycle's high-confidence oversized survivors).
DensifyReport densify_and_prune(GaussianCloud& cloud, CloudOptState* opt,
                                const std::vector<double>& mean_abs_grad,
                                const std::vector<double>& max_radius_px,
                                const DensifyConfig& cfg, double extent,
                                int cycle_index, bool stable, Rng& rng);

/// Frame indices used for training (the rest are the held-out test split).
std::vector<int> train_split(int frame_count, int test_every);
std::vector<int> test_split(int frame_count, int test_every);

/// Scene extent used to scale learning rates and size thresholds.
double scene_extent(const PlaneScaffold& scaffold);

/// Full optimization: init from the scaffold, per-iteration render/loss/
/// backward/Adam with density control, residual pose and tone refinement.
/// Deterministic given the seed, for any thread count.
TrainResult train(const CaptureBundle& bundle, const PlaneScaffold& scaffold,
                  const TrainOptions& opt);

/// Optimizes residual pose + tone of held-out frames against the photometric
/// loss with the cloud frozen.
CorrectionState refine_test_views(const GaussianCloud& cloud,
                                  const std::vector<CaptureFrame>& test_frames,
                                  int iters, const TrainOptions& opt,
                                  double extent);

}  // namespace panosplat
