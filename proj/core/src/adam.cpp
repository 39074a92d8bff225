#include "panosplat/adam.hpp"

#include <cmath>

#include "panosplat/errors.hpp"

namespace panosplat {

void AdamGroup::init(size_t rows) {
  t_ = 0;
  m_.assign(rows * stride_, 0.0);
  v_.assign(rows * stride_, 0.0);
}

void AdamGroup::step(double* params, const double* grads, size_t rows,
                     double lr) {
  if (rows * stride_ != m_.size())
    throw ValidationError("adam: state size does not match parameter count");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  const size_t n = m_.size();
  for (size_t i = 0; i < n; ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mh = m_[i] / bc1;
    const double vh = v_[i] / bc2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

void AdamGroup::erase_rows(const std::vector<size_t>& sorted_rows) {
  if (sorted_rows.empty()) return;
  size_t next = 0, write = 0;
  const size_t rows_total = m_.size() / stride_;
  for (size_t r = 0; r < rows_total; ++r) {
    if (next < sorted_rows.size() && sorted_rows[next] == r) {
      ++next;
      continue;
    }
    if (write != r)
      for (int k = 0; k < stride_; ++k) {
        m_[write * stride_ + k] = m_[r * stride_ + k];
        v_[write * stride_ + k] = v_[r * stride_ + k];
      }
    ++write;
  }
  m_.resize(write * stride_);
  v_.resize(write * stride_);
}

void AdamGroup::append_zero_rows(size_t rows) {
  m_.resize(m_.size() + rows * stride_, 0.0);
  v_.resize(v_.size() + rows * stride_, 0.0);
}

}  // namespace panosplat
