#include "panosplat/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"

namespace panosplat {

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::json j;
  j["stage"] = m.stage;
  j["version"] = m.version;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["config_hash"] = m.config_hash;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << "\n";
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("missing manifest " + (dir / "manifest.json").string());
  nlohmann::json j;
  is >> j;
  Manifest m;
  m.stage = j.at("stage").get<std::string>();
  m.version = j.value("version", std::string{});
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.config_hash = j.value("config_hash", std::string{});
  return m;
}

void verify_outputs(const std::filesystem::path& dir, const Manifest& m) {
  for (const auto& [name, hash] : m.outputs) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path))
      throw IoError("manifest output missing: " + path.string());
    if (hash_hex(hash_file(path)) != hash)
      throw IoError("manifest hash mismatch for " + path.string());
  }
}

}  // namespace panosplat
