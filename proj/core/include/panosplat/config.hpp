#pragma once

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>

#include "panosplat/losses.hpp"
#include "panosplat/scaffold.hpp"
#include "panosplat/scene_gen.hpp"
#include "panosplat/train.hpp"

namespace panosplat {

/// One config document for the whole pipeline. Unknown keys anywhere in the
/// document are rejected with a pointered message.
struct RunConfig {
  std::string scene_preset = "box_room";  // box_room | box_room_empty
  int width = 128, height = 128;
  TrajectorySpec trajectory;
  NoiseSpec noise;
  ScaffoldConfig scaffold;
  TrainOptions train;
  uint64_t seed = 1;

  SceneSpec make_scene() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& c);

/// JSON converters for the capture specs (also used by the bundle format).
nlohmann::json scene_to_json(const SceneSpec& s);
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json trajectory_to_json(const TrajectorySpec& s);
TrajectorySpec trajectory_from_json(const nlohmann::json& j, bool strict = true);
nlohmann::json noise_to_json(const NoiseSpec& s);
NoiseSpec noise_from_json(const nlohmann::json& j, bool strict = true);

}  // namespace panosplat
