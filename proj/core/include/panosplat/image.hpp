#pragma once

#include <cstddef>
#include <vector>

namespace panosplat {

/// Row-major H x W x C raster of doubles, channel-interleaved.
struct Image {
  int h = 0, w = 0, c = 1;
  std::vector<double> v;

  Image() = default;
  Image(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, fill) {}

  double& at(int y, int x, int ch = 0) {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch = 0) const {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }

  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
};

}  // namespace panosplat
