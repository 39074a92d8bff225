#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace panosplat {

/// Stage manifest: content hashes of a stage's inputs and outputs so
/// downstream stages can detect stale or tampered artifacts.
struct Manifest {
  std::string stage;
  std::string version = "0.1.0";
  std::map<std::string, std::string> inputs;   // name -> fnv1a64 hex
  std::map<std::string, std::string> outputs;  // name -> fnv1a64 hex
  std::string config_hash;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

/// Throws IoError when a recorded output hash no longer matches the file on
/// disk (paths are relative to the manifest directory).
void verify_outputs(const std::filesystem::path& dir, const Manifest& m);

}  // namespace panosplat
