#include <algorithm>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "panosplat/errors.hpp"
#include "panosplat/io.hpp"

namespace panosplat {

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.c != 3) throw IoError("write_png: expected 3-channel image");
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      auto& px = m.at<cv::Vec3b>(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(img.at(y, x, ch), 0.0, 1.0);
        px[2 - ch] = static_cast<uint8_t>(std::lround(v * 255.0));  // BGR order
      }
    }
  if (!cv::imwrite(path.string(), m))
    throw IoError("write_png: failed to write " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("read_png: cannot read " + path.string());
  Image img(m.rows, m.cols, 3);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const auto& px = m.at<cv::Vec3b>(y, x);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = px[2 - ch] / 255.0;
    }
  return img;
}

}  // namespace panosplat
