#pragma once

#include <filesystem>

#include "panosplat/scene_gen.hpp"

namespace panosplat {

/// Capture-bundle directory layout:
///   frames/%04d.png, depth/%04d.pfm, normal/%04d.pfm   (corrupted priors)
///   gt/frames/%04d.png, gt/depth/%04d.pfm, gt/normal/%04d.pfm
///   poses.json  (4x4 row-major world->camera, corrupted + ground truth,
///                intrinsics)
///   bundle.json (scene/trajectory/noise specs, seed, applied per-view noise)
void save_bundle(const std::filesystem::path& dir, const CaptureBundle& bundle);
CaptureBundle load_bundle(const std::filesystem::path& dir);

}  // namespace panosplat
