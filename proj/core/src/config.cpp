#include "panosplat/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "panosplat/errors.hpp"

namespace panosplat {

namespace {

using nlohmann::json;

/// Strict object reader: every consumed key is tracked and unknown keys are
/// rejected with the JSON-pointer-style context.
class Reader {
 public:
  Reader(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object())
      throw ValidationError(ctx_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (auto it = j_.find(key); it != j_.end()) {
      seen_.insert(key);
      try {
        out = it->get<T>();
      } catch (const json::exception&) {
        throw ValidationError(ctx_ + "." + key + ": wrong type");
      }
    }
  }

  void get_vec3(const char* key, Eigen::Vector3d& out) {
    std::vector<double> v;
    get(key, v);
    if (seen_.count(key)) {
      if (v.size() != 3)
        throw ValidationError(ctx_ + "." + key + ": expected 3 numbers");
      out = Eigen::Vector3d(v[0], v[1], v[2]);
    }
  }

  const json* sub(const char* key) {
    if (auto it = j_.find(key); it != j_.end()) {
      seen_.insert(key);
      return &*it;
    }
    return nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ValidationError(ctx_ + "." + it.key() + ": unknown key");
  }

 private:
  const json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw ValidationError(ctx + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json texture_to_json(const TextureDesc& t) {
  json j;
  switch (t.kind) {
    case TextureDesc::Kind::Constant: j["kind"] = "constant"; break;
    case TextureDesc::Kind::Checker: j["kind"] = "checker"; break;
    case TextureDesc::Kind::Stripes: j["kind"] = "stripes"; break;
  }
  j["color_a"] = vec3_json(t.color_a);
  j["color_b"] = vec3_json(t.color_b);
  j["scale"] = t.scale;
  return j;
}

TextureDesc texture_from_json(const json& j, const std::string& ctx) {
  Reader r(j, ctx);
  TextureDesc t;
  std::string kind = "constant";
  r.get("kind", kind);
  if (kind == "constant") t.kind = TextureDesc::Kind::Constant;
  else if (kind == "checker") t.kind = TextureDesc::Kind::Checker;
  else if (kind == "stripes") t.kind = TextureDesc::Kind::Stripes;
  else throw ValidationError(ctx + ".kind: unknown texture kind '" + kind + "'");
  r.get_vec3("color_a", t.color_a);
  r.get_vec3("color_b", t.color_b);
  r.get("scale", t.scale);
  r.finish();
  return t;
}

}  // namespace

json scene_to_json(const SceneSpec& s) {
  json j;
  j["planes"] = json::array();
  for (const auto& p : s.planes) {
    json jp;
    jp["corner"] = vec3_json(p.corner);
    jp["e1"] = vec3_json(p.e1);
    jp["e2"] = vec3_json(p.e2);
    jp["albedo"] = texture_to_json(p.albedo);
    j["planes"].push_back(jp);
  }
  j["boxes"] = json::array();
  for (const auto& b : s.boxes) {
    json jb;
    jb["min"] = vec3_json(b.pmin);
    jb["max"] = vec3_json(b.pmax);
    jb["face_albedo"] = json::array();
    for (const auto& f : b.face_albedo) jb["face_albedo"].push_back(vec3_json(f));
    j["boxes"].push_back(jb);
  }
  j["light"] = {{"ambient", vec3_json(s.light.ambient)},
                {"direction", vec3_json(s.light.direction)},
                {"intensity", vec3_json(s.light.intensity)}};
  return j;
}

SceneSpec scene_from_json(const json& j) {
  Reader r(j, "scene");
  SceneSpec s;
  if (const json* planes = r.sub("planes")) {
    for (size_t i = 0; i < planes->size(); ++i) {
      const std::string ctx = "scene.planes[" + std::to_string(i) + "]";
      Reader rp((*planes)[i], ctx);
      RectPlane p;
      rp.get_vec3("corner", p.corner);
      rp.get_vec3("e1", p.e1);
      rp.get_vec3("e2", p.e2);
      if (const json* alb = rp.sub("albedo"))
        p.albedo = texture_from_json(*alb, ctx + ".albedo");
      rp.finish();
      s.planes.push_back(p);
    }
  }
  if (const json* boxes = r.sub("boxes")) {
    for (size_t i = 0; i < boxes->size(); ++i) {
      const std::string ctx = "scene.boxes[" + std::to_string(i) + "]";
      Reader rb((*boxes)[i], ctx);
      BoxPrim b;
      rb.get_vec3("min", b.pmin);
      rb.get_vec3("max", b.pmax);
      if (const json* fa = rb.sub("face_albedo")) {
        if (fa->size() != 6)
          throw ValidationError(ctx + ".face_albedo: expected 6 colors");
        for (int f = 0; f < 6; ++f)
          b.face_albedo[f] = vec3_from((*fa)[f], ctx + ".face_albedo");
      }
      rb.finish();
      s.boxes.push_back(b);
    }
  }
  if (const json* light = r.sub("light")) {
    Reader rl(*light, "scene.light");
    rl.get_vec3("ambient", s.light.ambient);
    rl.get_vec3("direction", s.light.direction);
    rl.get_vec3("intensity", s.light.intensity);
    rl.finish();
  }
  r.finish();
  return s;
}

json trajectory_to_json(const TrajectorySpec& s) {
  json j;
  j["center"] = vec3_json(s.center);
  j["arm_radius"] = s.arm_radius;
  j["yaw_range"] = s.yaw_range;
  j["pitch_rows"] = s.pitch_rows;
  j["frames_per_row"] = s.frames_per_row;
  return j;
}

TrajectorySpec trajectory_from_json(const json& j, bool strict) {
  Reader r(j, "trajectory");
  TrajectorySpec s;
  r.get_vec3("center", s.center);
  r.get("arm_radius", s.arm_radius);
  r.get("yaw_range", s.yaw_range);
  r.get("pitch_rows", s.pitch_rows);
  r.get("frames_per_row", s.frames_per_row);
  if (strict) r.finish();
  return s;
}

json noise_to_json(const NoiseSpec& s) {
  json j;
  j["rot_drift_std"] = s.rot_drift_std;
  j["trans_drift_std"] = s.trans_drift_std;
  j["gain_min"] = s.gain_min;
  j["gain_max"] = s.gain_max;
  j["bias_min"] = s.bias_min;
  j["bias_max"] = s.bias_max;
  j["depth_scale_min"] = s.depth_scale_min;
  j["depth_scale_max"] = s.depth_scale_max;
  j["depth_shift_min"] = s.depth_shift_min;
  j["depth_shift_max"] = s.depth_shift_max;
  j["plane_scale_jitter"] = s.plane_scale_jitter;
  j["plane_shift_jitter"] = s.plane_shift_jitter;
  j["normal_noise_std"] = s.normal_noise_std;
  return j;
}

NoiseSpec noise_from_json(const json& j, bool strict) {
  Reader r(j, "noise");
  NoiseSpec s;
  r.get("rot_drift_std", s.rot_drift_std);
  r.get("trans_drift_std", s.trans_drift_std);
  r.get("gain_min", s.gain_min);
  r.get("gain_max", s.gain_max);
  r.get("bias_min", s.bias_min);
  r.get("bias_max", s.bias_max);
  r.get("depth_scale_min", s.depth_scale_min);
  r.get("depth_scale_max", s.depth_scale_max);
  r.get("depth_shift_min", s.depth_shift_min);
  r.get("depth_shift_max", s.depth_shift_max);
  r.get("plane_scale_jitter", s.plane_scale_jitter);
  r.get("plane_shift_jitter", s.plane_shift_jitter);
  r.get("normal_noise_std", s.normal_noise_std);
  if (strict) r.finish();
  return s;
}

SceneSpec RunConfig::make_scene() const {
  if (scene_preset == "box_room") return box_room_scene(true);
  if (scene_preset == "box_room_empty") return box_room_scene(false);
  throw ValidationError("scene.preset: unknown preset '" + scene_preset + "'");
}

RunConfig parse_config(const json& j) {
  Reader r(j, "config");
  RunConfig c;
  if (const json* scene = r.sub("scene")) {
    Reader rs(*scene, "scene");
    rs.get("preset", c.scene_preset);
    rs.finish();
  }
  r.get("width", c.width);
  r.get("height", c.height);
  r.get("seed", c.seed);
  if (const json* t = r.sub("trajectory")) c.trajectory = trajectory_from_json(*t);
  if (const json* n = r.sub("noise")) c.noise = noise_from_json(*n);
  if (const json* s = r.sub("scaffold")) {
    Reader rs(*s, "scaffold");
    rs.get("bandwidth_normal_deg", c.scaffold.bandwidth_normal_deg);
    rs.get("bandwidth_offset", c.scaffold.bandwidth_offset);
    rs.get("anchor_stride", c.scaffold.anchor_stride);
    rs.get("min_plane_frac", c.scaffold.min_plane_frac);
    rs.get("min_overlap_pixels", c.scaffold.min_overlap_pixels);
    rs.get("fit_steps", c.scaffold.fit_steps);
    rs.get("fit_lr", c.scaffold.fit_lr);
    rs.get("huber_delta", c.scaffold.huber_delta);
    rs.get("overlap_rel_tol", c.scaffold.overlap_rel_tol);
    rs.get("voxel_size", c.scaffold.voxel_size);
    rs.finish();
  }
  if (const json* t = r.sub("train")) {
    Reader rt(*t, "train");
    if (const json* d = rt.sub("densify")) {
      Reader rd(*d, "train.densify");
      auto& dc = c.train.densify;
      rd.get("grad_threshold", dc.grad_threshold);
      rd.get("densify_interval", dc.densify_interval);
      rd.get("densify_until", dc.densify_until);
      rd.get("total_iters", dc.total_iters);
      rd.get("percent_dense", dc.percent_dense);
      rd.get("size_threshold_world_frac", dc.size_threshold_world_frac);
      rd.get("size_threshold_screen", dc.size_threshold_screen);
      rd.get("opacity_prune_floor", dc.opacity_prune_floor);
      rd.get("stable_opacity_threshold", dc.stable_opacity_threshold);
      rd.get("opacity_reset_interval", dc.opacity_reset_interval);
      rd.get("split_scale_factor", dc.split_scale_factor);
      rd.finish();
    }
    if (const json* wjson = rt.sub("weights")) {
      Reader rw(*wjson, "train.weights");
      rw.get("l1", c.train.weights.l1);
      rw.get("dssim", c.train.weights.dssim);
      rw.get("normal", c.train.weights.normal);
      rw.get("d2n", c.train.weights.d2n);
      rw.finish();
    }
    if (const json* l = rt.sub("lr")) {
      Reader rl(*l, "train.lr");
      auto& lr = c.train.lr;
      rl.get("mu_init", lr.mu_init);
      rl.get("mu_final", lr.mu_final);
      rl.get("sh", lr.sh);
      rl.get("opacity", lr.opacity);
      rl.get("scale", lr.scale);
      rl.get("rot", lr.rot);
      rl.get("residual_q", lr.residual_q);
      rl.get("residual_t", lr.residual_t);
      rl.get("tone", lr.tone);
      rl.finish();
    }
    rt.get("optimize_pose", c.train.optimize_pose);
    rt.get("optimize_tone", c.train.optimize_tone);
    rt.get("stable_pruning", c.train.stable_pruning);
    rt.get("knn_k", c.train.knn_k);
    rt.get("flatten_eps", c.train.flatten_eps);
    rt.get("report_interval", c.train.report_interval);
    rt.get("refine_iters", c.train.refine_iters);
    rt.get("test_every", c.train.test_every);
    rt.finish();
  }
  r.finish();
  c.train.seed = c.seed;
  c.trajectory.validate();
  c.noise.validate();
  c.train.densify.validate();
  c.train.weights.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config parse error in " + path.string() + ": " +
                          e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["scene"] = {{"preset", c.scene_preset}};
  j["width"] = c.width;
  j["height"] = c.height;
  j["seed"] = c.seed;
  j["trajectory"] = trajectory_to_json(c.trajectory);
  j["noise"] = noise_to_json(c.noise);
  j["scaffold"] = {{"bandwidth_normal_deg", c.scaffold.bandwidth_normal_deg},
                   {"bandwidth_offset", c.scaffold.bandwidth_offset},
                   {"anchor_stride", c.scaffold.anchor_stride},
                   {"min_plane_frac", c.scaffold.min_plane_frac},
                   {"min_overlap_pixels", c.scaffold.min_overlap_pixels},
                   {"fit_steps", c.scaffold.fit_steps},
                   {"fit_lr", c.scaffold.fit_lr},
                   {"huber_delta", c.scaffold.huber_delta},
                   {"overlap_rel_tol", c.scaffold.overlap_rel_tol},
                   {"voxel_size", c.scaffold.voxel_size}};
  const auto& dc = c.train.densify;
  j["train"] = {
      {"densify",
       {{"grad_threshold", dc.grad_threshold},
        {"densify_interval", dc.densify_interval},
        {"densify_until", dc.densify_until},
        {"total_iters", dc.total_iters},
        {"percent_dense", dc.percent_dense},
        {"size_threshold_world_frac", dc.size_threshold_world_frac},
        {"size_threshold_screen", dc.size_threshold_screen},
        {"opacity_prune_floor", dc.opacity_prune_floor},
        {"stable_opacity_threshold", dc.stable_opacity_threshold},
        {"opacity_reset_interval", dc.opacity_reset_interval},
        {"split_scale_factor", dc.split_scale_factor}}},
      {"weights",
       {{"l1", c.train.weights.l1},
        {"dssim", c.train.weights.dssim},
        {"normal", c.train.weights.normal},
        {"d2n", c.train.weights.d2n}}},
      {"lr",
       {{"mu_init", c.train.lr.mu_init},
        {"mu_final", c.train.lr.mu_final},
        {"sh", c.train.lr.sh},
        {"opacity", c.train.lr.opacity},
        {"scale", c.train.lr.scale},
        {"rot", c.train.lr.rot},
        {"residual_q", c.train.lr.residual_q},
        {"residual_t", c.train.lr.residual_t},
        {"tone", c.train.lr.tone}}},
      {"optimize_pose", c.train.optimize_pose},
      {"optimize_tone", c.train.optimize_tone},
      {"stable_pruning", c.train.stable_pruning},
      {"knn_k", c.train.knn_k},
      {"flatten_eps", c.train.flatten_eps},
      {"report_interval", c.train.report_interval},
      {"refine_iters", c.train.refine_iters},
      {"test_every", c.train.test_every}};
  return j;
}

}  // namespace panosplat
