#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <omp.h>

#include "panosplat/bundle_io.hpp"
#include "panosplat/config.hpp"
#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"
#include "panosplat/manifest.hpp"
#include "panosplat/metrics.hpp"
#include "panosplat/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace panosplat;

namespace {

int g_verbosity = 1;  // PANOSPLAT_LOG: 0 quiet, 1 info, 2 debug

void info(const std::string& msg) {
  if (g_verbosity >= 1) std::cout << msg << "\n";
}

uint64_t hash_json(const json& j) {
  const std::string s = j.dump();
  return fnv1a64(s.data(), s.size());
}

void save_corrections(const fs::path& path, const CorrectionState& cs) {
  json j;
  j["frames"] = json::array();
  for (size_t i = 0; i < cs.residual.size(); ++i) {
    const auto& r = cs.residual[i];
    const auto& t = cs.tone[i];
    json f;
    f["q"] = {r.q[0], r.q[1], r.q[2], r.q[3]};
    f["t"] = {r.t[0], r.t[1], r.t[2]};
    f["w"] = {t.w[0], t.w[1], t.w[2]};
    f["b"] = {t.b[0], t.b[1], t.b[2]};
    j["frames"].push_back(f);
  }
  std::ofstream(path) << j.dump(2) << "\n";
}

CorrectionState load_corrections(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("missing corrections file " + path.string());
  json j;
  is >> j;
  CorrectionState cs;
  for (const auto& f : j.at("frames")) {
    ResidualPose r;
    for (int k = 0; k < 4; ++k) r.q[k] = f.at("q")[k].get<double>();
    for (int k = 0; k < 3; ++k) r.t[k] = f.at("t")[k].get<double>();
    ToneParams t;
    for (int k = 0; k < 3; ++k) t.w[k] = f.at("w")[k].get<double>();
    for (int k = 0; k < 3; ++k) t.b[k] = f.at("b")[k].get<double>();
    cs.residual.push_back(r);
    cs.tone.push_back(t);
  }
  return cs;
}

RunConfig resolve_config(const std::string& config_path, uint64_t seed_override,
                         bool has_seed) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (has_seed) {
    cfg.seed = seed_override;
    cfg.train.seed = seed_override;
  }
  return cfg;
}

void require_bundle(const fs::path& dir) {
  if (!fs::exists(dir / "bundle.json"))
    throw IoError("not a capture bundle (missing bundle.json): " + dir.string());
  if (fs::exists(dir / "manifest.json"))
    verify_outputs(dir, read_manifest(dir));
}

int cmd_gen(const RunConfig& cfg, const fs::path& out) {
  const SceneSpec scene = cfg.make_scene();
  scene.validate();
  cfg.trajectory.validate();
  cfg.noise.validate();
  const std::vector<Pose> poses = sample_trajectory(cfg.trajectory);
  const Intrinsics K = default_intrinsics(cfg.height, cfg.width);
  std::vector<CaptureFrame> gt;
  info("rendering " + std::to_string(poses.size()) + " ground-truth views");
  for (const Pose& p : poses)
    gt.push_back(render_ground_truth(scene, p, K, cfg.height, cfg.width));
  CaptureBundle bundle = corrupt_bundle(gt, cfg.noise, cfg.seed);
  bundle.scene = scene;
  bundle.trajectory = cfg.trajectory;
  save_bundle(out, bundle);

  Manifest m;
  m.stage = "gen";
  m.config_hash = hash_hex(hash_json(config_to_json(cfg)));
  m.outputs["bundle.json"] = hash_hex(hash_file(out / "bundle.json"));
  m.outputs["poses.json"] = hash_hex(hash_file(out / "poses.json"));
  write_manifest(out, m);
  info("bundle written to " + out.string());
  return 0;
}

int cmd_assemble(const RunConfig& cfg, const fs::path& bundle_dir,
                 const fs::path& out, bool align) {
  require_bundle(bundle_dir);
  const CaptureBundle bundle = load_bundle(bundle_dir);
  info("assembling scaffold from " + std::to_string(bundle.frames.size()) +
       " frames");
  PlaneScaffold scaffold = assemble(bundle.frames, cfg.scaffold, align);
  info("scaffold points before downsampling: " + std::to_string(scaffold.size()));
  scaffold = downsample_scaffold(scaffold, cfg.scaffold.voxel_size);
  info("scaffold points after downsampling: " + std::to_string(scaffold.size()));
  fs::create_directories(out);
  save_scaffold_ply(out / "scaffold.ply", scaffold);

  Manifest m;
  m.stage = "assemble";
  m.config_hash = hash_hex(hash_json(config_to_json(cfg)));
  m.inputs["bundle.json"] = hash_hex(hash_file(bundle_dir / "bundle.json"));
  m.outputs["scaffold.ply"] = hash_hex(hash_file(out / "scaffold.ply"));
  write_manifest(out, m);
  info("scaffold written to " + (out / "scaffold.ply").string());
  return 0;
}

int cmd_train(RunConfig cfg, const fs::path& bundle_dir,
              const fs::path& scaffold_dir, const fs::path& out) {
  require_bundle(bundle_dir);
  if (fs::exists(scaffold_dir / "manifest.json"))
    verify_outputs(scaffold_dir, read_manifest(scaffold_dir));
  const CaptureBundle bundle = load_bundle(bundle_dir);
  const PlaneScaffold scaffold = load_scaffold_ply(scaffold_dir / "scaffold.ply");
  fs::create_directories(out);
  cfg.train.log_path = out / "train_log.jsonl";
  info("training " + std::to_string(cfg.train.densify.total_iters) +
       " iterations");
  const TrainResult res = train(bundle, scaffold, cfg.train);
  save_cloud_ply(out / "point_cloud.ply", res.cloud);
  save_corrections(out / "corrections.json", res.corrections);
  std::ofstream(out / "config.json") << config_to_json(cfg).dump(2) << "\n";
  std::ofstream(out / "timing.json")
      << json{{"train_wall_sec", res.report.wall_sec}}.dump(2) << "\n";

  Manifest m;
  m.stage = "train";
  m.config_hash = hash_hex(hash_json(config_to_json(cfg)));
  m.inputs["bundle.json"] = hash_hex(hash_file(bundle_dir / "bundle.json"));
  m.inputs["scaffold.ply"] =
      hash_hex(hash_file(scaffold_dir / "scaffold.ply"));
  m.outputs["point_cloud.ply"] = hash_hex(hash_file(out / "point_cloud.ply"));
  m.outputs["corrections.json"] =
      hash_hex(hash_file(out / "corrections.json"));
  m.outputs["train_log.jsonl"] = hash_hex(hash_file(out / "train_log.jsonl"));
  write_manifest(out, m);
  if (!res.report.entries.empty())
    info("final gaussians: " +
         std::to_string(res.report.entries.back().gaussian_count));
  info("run written to " + out.string());
  return 0;
}

int cmd_eval(const fs::path& run_dir, const fs::path& bundle_dir,
             const std::string& tag) {
  require_bundle(bundle_dir);
  verify_outputs(run_dir, read_manifest(run_dir));
  const RunConfig cfg = load_config(run_dir / "config.json");
  const CaptureBundle bundle = load_bundle(bundle_dir);
  const GaussianCloud cloud = load_cloud_ply(run_dir / "point_cloud.ply");

  std::vector<CaptureFrame> test_frames;
  for (int i : test_split(static_cast<int>(bundle.frames.size()),
                          cfg.train.test_every))
    test_frames.push_back(bundle.frames[i]);
  if (test_frames.empty()) throw ValidationError("eval: empty test split");
  const PlaneScaffold scaffold_proxy{{}, {}, {}};
  (void)scaffold_proxy;
  double extent = 1.0;
  {
    Eigen::Vector3d lo = cloud.mu.empty() ? Eigen::Vector3d::Zero() : cloud.mu[0];
    Eigen::Vector3d hi = lo;
    for (const auto& p : cloud.mu) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    extent = std::max(0.5 * (hi - lo).norm(), 1e-6);
  }
  info("refining " + std::to_string(test_frames.size()) + " test views");
  const CorrectionState cs = refine_test_views(
      cloud, test_frames, cfg.train.refine_iters, cfg.train, extent);
  const EvalReport rep = evaluate(cloud, test_frames, cs.residual, cs.tone, tag);
  std::ofstream(run_dir / "eval.json") << rep.to_json() << "\n";
  std::ofstream(run_dir / "eval.txt") << rep.to_table();
  info(rep.to_table());
  return 0;
}

int cmd_render(const fs::path& run_dir, const fs::path& bundle_dir,
               int frame_index, bool pano, const fs::path& out) {
  verify_outputs(run_dir, read_manifest(run_dir));
  const GaussianCloud cloud = load_cloud_ply(run_dir / "point_cloud.ply");
  Image img;
  if (pano) {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    if (fs::exists(bundle_dir / "bundle.json")) {
      const CaptureBundle bundle = load_bundle(bundle_dir);
      center = bundle.trajectory.center;
    }
    img = render_panorama(cloud, center, 256);
  } else {
    require_bundle(bundle_dir);
    const CaptureBundle bundle = load_bundle(bundle_dir);
    if (frame_index < 0 || frame_index >= static_cast<int>(bundle.frames.size()))
      throw ValidationError("render: frame index out of range");
    const CaptureFrame& f = bundle.frames[frame_index];
    CorrectionState cs;
    if (fs::exists(run_dir / "corrections.json"))
      cs = load_corrections(run_dir / "corrections.json");
    const ResidualPose res = frame_index < static_cast<int>(cs.residual.size())
                                 ? cs.residual[frame_index]
                                 : ResidualPose{};
    const ToneParams tone = frame_index < static_cast<int>(cs.tone.size())
                                ? cs.tone[frame_index]
                                : ToneParams{};
    img = render(cloud, f.pose, &res, f.K, f.image.h, f.image.w, &tone).color;
  }
  for (auto& v : img.v) v = std::clamp(v, 0.0, 1.0);
  write_png(out, img);
  info("image written to " + out.string());
  return 0;
}

int cmd_ablate(const RunConfig& base_cfg, const fs::path& bundle_dir,
               const fs::path& scaffold_dir, const fs::path& out,
               bool with_baseline) {
  struct Variant {
    std::string tag;
    bool pose, tone, stable, geo;
  };
  std::vector<Variant> variants = {
      {"full", true, true, true, true},
      {"wo_pose", false, true, true, true},
      {"wo_color", true, false, true, true},
      {"wo_stable", true, true, false, false},
  };
  if (with_baseline) variants.push_back({"baseline", false, false, false, false});

  json table = json::array();
  std::vector<std::pair<std::string, double>> rows;
  for (const Variant& v : variants) {
    RunConfig cfg = base_cfg;
    cfg.train.optimize_pose = v.pose;
    cfg.train.optimize_tone = v.tone;
    cfg.train.stable_pruning = v.stable;
    if (!v.geo) cfg.train.weights.normal = cfg.train.weights.d2n = 0.0;
    const fs::path vdir = out / v.tag;
    info("=== ablation variant: " + v.tag + " ===");
    cmd_train(cfg, bundle_dir, scaffold_dir, vdir);
    cmd_eval(vdir, bundle_dir, v.tag);
    std::ifstream is(vdir / "eval.json");
    json rep;
    is >> rep;
    table.push_back(rep);
    rows.emplace_back(v.tag, rep.at("mean_psnr").get<double>());
  }
  fs::create_directories(out);
  std::ofstream(out / "ablation.json") << table.dump(2) << "\n";
  std::ostringstream os;
  os << "variant        mean_psnr_db\n";
  for (const auto& [tag, p] : rows) {
    os.width(0);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-14s %10.3f\n", tag.c_str(), p);
    os << buf;
  }
  std::ofstream(out / "ablation.txt") << os.str();
  info(os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lv = std::getenv("PANOSPLAT_LOG")) g_verbosity = std::atoi(lv);

  CLI::App app{"Plane-scaffolded Gaussian splatting for panorama-style captures"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  int threads = 0;
  app.add_option("--threads", threads, "Cap OpenMP parallelism")
      ->check(CLI::PositiveNumber);

  std::string bundle_dir, scaffold_dir, run_dir, out_dir, tag;
  int frame_index = -1;
  bool pano = false, no_align = false, with_baseline = false;

  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", config_path, "JSON config file");
      sub->add_option("--seed", seed, "Override the config seed");
    }
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic capture bundle");
  add_common(gen, true);
  gen->add_option("--out", out_dir, "Output bundle directory")->required();

  CLI::App* assemble =
      app.add_subcommand("assemble", "Assemble the plane scaffold");
  add_common(assemble, true);
  assemble->add_option("--bundle", bundle_dir, "Capture bundle directory")
      ->required();
  assemble->add_option("--out", out_dir, "Output directory")->required();
  assemble->add_flag("--no-align", no_align,
                     "Skip affine depth alignment (diagnostics)");

  CLI::App* train_cmd = app.add_subcommand("train", "Optimize the Gaussians");
  add_common(train_cmd, true);
  train_cmd->add_option("--bundle", bundle_dir, "Capture bundle directory")
      ->required();
  train_cmd->add_option("--scaffold", scaffold_dir, "Scaffold directory")
      ->required();
  train_cmd->add_option("--out", out_dir, "Run output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate held-out views");
  eval_cmd->add_option("--run", run_dir, "Training run directory")->required();
  eval_cmd->add_option("--bundle", bundle_dir, "Capture bundle directory")
      ->required();
  eval_cmd->add_option("--tag", tag, "Report tag");

  CLI::App* render_cmd = app.add_subcommand("render", "Render a view or panorama");
  render_cmd->add_option("--run", run_dir, "Training run directory")->required();
  render_cmd->add_option("--bundle", bundle_dir, "Capture bundle directory");
  render_cmd->add_option("--frame", frame_index, "Bundle frame index");
  render_cmd->add_flag("--pano", pano, "Render an equirectangular panorama");
  render_cmd->add_option("--out", out_dir, "Output PNG path")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Run the module ablation");
  add_common(ablate, true);
  ablate->add_option("--bundle", bundle_dir, "Capture bundle directory")
      ->required();
  ablate->add_option("--scaffold", scaffold_dir, "Scaffold directory")
      ->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_flag("--baseline", with_baseline,
                   "Also run the no-correction baseline variant");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    const bool has_seed = gen->count("--seed") || assemble->count("--seed") ||
                          train_cmd->count("--seed") || ablate->count("--seed");
    const RunConfig cfg = resolve_config(config_path, seed, has_seed);
    if (gen->parsed()) return cmd_gen(cfg, out_dir);
    if (assemble->parsed()) return cmd_assemble(cfg, bundle_dir, out_dir, !no_align);
    if (train_cmd->parsed()) return cmd_train(cfg, bundle_dir, scaffold_dir, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(run_dir, bundle_dir, tag);
    if (render_cmd->parsed())
      return cmd_render(run_dir, bundle_dir, frame_index, pano, out_dir);
    if (ablate->parsed())
      return cmd_ablate(cfg, bundle_dir, scaffold_dir, out_dir, with_baseline);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
