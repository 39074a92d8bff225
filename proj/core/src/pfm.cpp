#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"

namespace panosplat {

void write_pfm(const std::filesystem::path& path, const Image& img) {
  if (img.c != 1 && img.c != 3)
    throw IoError("write_pfm: channel count must be 1 or 3");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pfm: cannot open " + path.string());
  f << (img.c == 1 ? "Pf" : "PF") << "\n" << img.w << " " << img.h << "\n-1.0\n";
  // PFM stores rows bottom-up; scale -1 marks little-endian.
  std::vector<float> row(static_cast<size_t>(img.w) * img.c);
  for (int y = img.h - 1; y >= 0; --y) {
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch)
        row[static_cast<size_t>(x) * img.c + ch] = static_cast<float>(img.at(y, x, ch));
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pfm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  f >> magic >> w >> h >> scale;
  f.get();  // single whitespace after header
  if ((magic != "Pf" && magic != "PF") || w <= 0 || h <= 0)
    throw IoError("read_pfm: bad header in " + path.string());
  if (scale >= 0) throw IoError("read_pfm: big-endian PFM unsupported");
  const int c = magic == "Pf" ? 1 : 3;
  Image img(h, w, c);
  std::vector<float> row(static_cast<size_t>(w) * c);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) throw IoError("read_pfm: truncated file " + path.string());
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        img.at(y, x, ch) = row[static_cast<size_t>(x) * c + ch];
  }
  return img;
}

uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("hash_file: cannot open " + path.string());
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    const auto n = f.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<uint8_t>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace panosplat
