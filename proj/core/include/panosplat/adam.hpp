#pragma once

#include <cstddef>
#include <vector>

namespace panosplat {

/// Adam with per-element first/second moments. Structural edits (prune /
/// append during density control) are mirrored through erase_rows /
/// append_zero_rows so moments stay aligned with their parameters.
class AdamGroup {
 public:
  explicit AdamGroup(int stride = 1) : stride_(stride) {}

  void init(size_t rows);
  void step(double* params, const double* grads, size_t rows, double lr);
  /// Removes the given sorted row indices.
  void erase_rows(const std::vector<size_t>& sorted_rows);
  void append_zero_rows(size_t rows);
  int stride() const { return stride_; }
  size_t rows() const { return m_.size() / stride_; }

  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

 private:
  int stride_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace panosplat
