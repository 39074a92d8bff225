#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "panosplat/image.hpp"

namespace panosplat {

/// PFM, 32-bit float little-endian. 1-channel ("Pf") or 3-channel ("PF").
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

/// 8-bit RGB PNG. Values clamped to [0,1] and quantized on write.
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

/// FNV-1a 64-bit content hashes, used by stage manifests.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t hash_file(const std::filesystem::path& path);
std::string hash_hex(uint64_t h);

}  // namespace panosplat
