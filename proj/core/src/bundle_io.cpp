#include "panosplat/bundle_io.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "panosplat/config.hpp"
#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"

namespace panosplat {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string frame_name(int i) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

json pose_to_json(const Pose& p) {
  json rows = json::array();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.R;
  m.topRightCorner<3, 1>() = p.t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) rows.push_back(m(r, c));
  return rows;
}

Pose pose_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 16)
    throw ValidationError(ctx + ": expected 16 numbers (4x4 row-major)");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j[r * 4 + c].get<double>();
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

void save_frames(const fs::path& dir, const std::vector<CaptureFrame>& frames) {
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "depth");
  fs::create_directories(dir / "normal");
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::string nm = frame_name(static_cast<int>(i));
    write_png(dir / "frames" / (nm + ".png"), frames[i].image);
    write_pfm(dir / "depth" / (nm + ".pfm"), frames[i].depth);
    write_pfm(dir / "normal" / (nm + ".pfm"), frames[i].normal);
  }
}

void load_frames(const fs::path& dir, std::vector<CaptureFrame>& frames) {
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::string nm = frame_name(static_cast<int>(i));
    frames[i].image = read_png(dir / "frames" / (nm + ".png"));
    frames[i].depth = read_pfm(dir / "depth" / (nm + ".pfm"));
    frames[i].normal = read_pfm(dir / "normal" / (nm + ".pfm"));
  }
}

}  // namespace

void save_bundle(const fs::path& dir, const CaptureBundle& bundle) {
  if (bundle.frames.size() != bundle.gt_frames.size())
    throw ValidationError("save_bundle: corrupted/ground-truth length mismatch");
  fs::create_directories(dir);
  save_frames(dir, bundle.frames);
  save_frames(dir / "gt", bundle.gt_frames);

  json poses;
  poses["intrinsics"] = {{"fx", bundle.frames[0].K.fx},
                         {"fy", bundle.frames[0].K.fy},
                         {"cx", bundle.frames[0].K.cx},
                         {"cy", bundle.frames[0].K.cy}};
  poses["frames"] = json::array();
  for (size_t i = 0; i < bundle.frames.size(); ++i) {
    json f;
    f["pose"] = pose_to_json(bundle.frames[i].pose);
    f["gt_pose"] = pose_to_json(bundle.gt_frames[i].pose);
    poses["frames"].push_back(f);
  }
  std::ofstream(dir / "poses.json") << poses.dump(2) << "\n";

  json meta;
  meta["seed"] = bundle.seed;
  meta["width"] = bundle.width;
  meta["height"] = bundle.height;
  meta["scene"] = scene_to_json(bundle.scene);
  meta["trajectory"] = trajectory_to_json(bundle.trajectory);
  meta["noise"] = noise_to_json(bundle.noise);
  meta["applied"] = json::array();
  for (const auto& a : bundle.applied) {
    json ja;
    ja["gain"] = {a.gain.x(), a.gain.y(), a.gain.z()};
    ja["bias"] = {a.bias.x(), a.bias.y(), a.bias.z()};
    ja["depth_scale"] = a.depth_scale;
    ja["depth_shift"] = a.depth_shift;
    ja["plane_scale"] = a.plane_scale;
    ja["plane_shift"] = a.plane_shift;
    meta["applied"].push_back(ja);
  }
  std::ofstream(dir / "bundle.json") << meta.dump(2) << "\n";
}

CaptureBundle load_bundle(const fs::path& dir) {
  std::ifstream bs(dir / "bundle.json");
  if (!bs) throw IoError("load_bundle: missing " + (dir / "bundle.json").string());
  json meta;
  bs >> meta;
  std::ifstream ps(dir / "poses.json");
  if (!ps) throw IoError("load_bundle: missing " + (dir / "poses.json").string());
  json poses;
  ps >> poses;

  CaptureBundle b;
  b.seed = meta.at("seed").get<uint64_t>();
  b.width = meta.at("width").get<int>();
  b.height = meta.at("height").get<int>();
  b.scene = scene_from_json(meta.at("scene"));
  b.trajectory = trajectory_from_json(meta.at("trajectory"));
  b.noise = noise_from_json(meta.at("noise"));
  for (const auto& ja : meta.at("applied")) {
    AppliedViewNoise a;
    a.gain = {ja.at("gain")[0].get<double>(), ja.at("gain")[1].get<double>(),
              ja.at("gain")[2].get<double>()};
    a.bias = {ja.at("bias")[0].get<double>(), ja.at("bias")[1].get<double>(),
              ja.at("bias")[2].get<double>()};
    a.depth_scale = ja.at("depth_scale").get<double>();
    a.depth_shift = ja.at("depth_shift").get<double>();
    a.plane_scale = ja.at("plane_scale").get<std::vector<double>>();
    a.plane_shift = ja.at("plane_shift").get<std::vector<double>>();
    b.applied.push_back(a);
  }

  Intrinsics K;
  K.fx = poses.at("intrinsics").at("fx").get<double>();
  K.fy = poses.at("intrinsics").at("fy").get<double>();
  K.cx = poses.at("intrinsics").at("cx").get<double>();
  K.cy = poses.at("intrinsics").at("cy").get<double>();
  const auto& jframes = poses.at("frames");
  b.frames.resize(jframes.size());
  b.gt_frames.resize(jframes.size());
  for (size_t i = 0; i < jframes.size(); ++i) {
    const std::string ctx = "poses.frames[" + std::to_string(i) + "]";
    b.frames[i].K = b.gt_frames[i].K = K;
    b.frames[i].pose = pose_from_json(jframes[i].at("pose"), ctx + ".pose");
    b.gt_frames[i].pose =
        pose_from_json(jframes[i].at("gt_pose"), ctx + ".gt_pose");
  }
  load_frames(dir, b.frames);
  load_frames(dir / "gt", b.gt_frames);
  return b;
}

}  // namespace panosplat
