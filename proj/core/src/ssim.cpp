#include "panosplat/ssim.hpp"

#include <array>
#include <cmath>

#include "panosplat/errors.hpp"

namespace panosplat {

namespace {

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  const int r = kSsimWindow / 2;
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - r;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable valid-mode Gaussian filter: (h, w, c) -> (h-10, w-10, c).
Image conv_valid(const Image& src) {
  const auto k = gaussian_kernel();
  const int oh = src.h - kSsimWindow + 1, ow = src.w - kSsimWindow + 1;
  Image tmp(src.h, ow, src.c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < src.c; ++ch) {
        double s = 0;
        for (int i = 0; i < kSsimWindow; ++i) s += k[i] * src.at(y, x + i, ch);
        tmp.at(y, x, ch) = s;
      }
  Image out(oh, ow, src.c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < src.c; ++ch) {
        double s = 0;
        for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp.at(y + i, x, ch);
        out.at(y, x, ch) = s;
      }
  return out;
}

/// Adjoint of conv_valid: scatters window-space gradients back to pixels.
Image conv_adjoint(const Image& g, int h, int w) {
  const auto k = gaussian_kernel();
  Image tmp(g.h, w, g.c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < g.c; ++ch) {
        double s = 0;
        const int i0 = std::max(0, x - (w - kSsimWindow));
        const int i1 = std::min(kSsimWindow - 1, x);
        for (int i = i0; i <= i1; ++i) s += k[i] * g.at(y, x - i, ch);
        tmp.at(y, x, ch) = s;
      }
  Image out(h, w, g.c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < g.c; ++ch) {
        double s = 0;
        const int i0 = std::max(0, y - (h - kSsimWindow));
        const int i1 = std::min(kSsimWindow - 1, y);
        for (int i = i0; i <= i1; ++i) s += k[i] * tmp.at(y - i, x, ch);
        out.at(y, x, ch) = s;
      }
  return out;
}

Image mul(const Image& a, const Image& b) {
  Image out(a.h, a.w, a.c);
  for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

void check_inputs(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ValidationError("ssim: image shapes differ");
  if (a.h < kSsimWindow || a.w < kSsimWindow)
    throw ValidationError("ssim: image smaller than the 11x11 window");
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  check_inputs(a, b);
  const double C1 = kSsimK1 * kSsimK1, C2 = kSsimK2 * kSsimK2;
  const Image mu_a = conv_valid(a), mu_b = conv_valid(b);
  const Image a2 = conv_valid(mul(a, a)), b2 = conv_valid(mul(b, b));
  const Image ab = conv_valid(mul(a, b));
  double sum = 0;
  for (size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = a2.v[i] - ma * ma, vb = b2.v[i] - mb * mb;
    const double cov = ab.v[i] - ma * mb;
    const double n = (2 * ma * mb + C1) * (2 * cov + C2);
    const double d = (ma * ma + mb * mb + C1) * (va + vb + C2);
    sum += n / d;
  }
  return sum / static_cast<double>(mu_a.v.size());
}

SsimGrad ssim_with_grad(const Image& a, const Image& b) {
  check_inputs(a, b);
  const double C1 = kSsimK1 * kSsimK1, C2 = kSsimK2 * kSsimK2;
  const Image mu_a = conv_valid(a), mu_b = conv_valid(b);
  const Image a2 = conv_valid(mul(a, a)), b2 = conv_valid(mul(b, b));
  const Image ab = conv_valid(mul(a, b));
  const double inv_n = 1.0 / static_cast<double>(mu_a.v.size());

  SsimGrad out;
  // Window-space gradients: g_mu hits mu_a directly, g_a2 the filtered a^2,
  // g_ab the filtered a*b.
  Image g_mu(mu_a.h, mu_a.w, mu_a.c), g_a2(mu_a.h, mu_a.w, mu_a.c),
      g_ab(mu_a.h, mu_a.w, mu_a.c);
  double sum = 0;
  for (size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = a2.v[i] - ma * ma, vb = b2.v[i] - mb * mb;
    const double cov = ab.v[i] - ma * mb;
    const double A1 = 2 * ma * mb + C1, A2 = 2 * cov + C2;
    const double B1 = ma * ma + mb * mb + C1, B2 = va + vb + C2;
    const double S = A1 * A2 / (B1 * B2);
    sum += S;
    const double d_cov = 2 * A1 / (B1 * B2);
    const double d_va = -S / B2;
    const double d_mu = 2 * mb * A2 / (B1 * B2) - 2 * ma * S / B1;
    g_mu.v[i] = inv_n * (d_mu - 2 * ma * d_va - mb * d_cov);
    g_a2.v[i] = inv_n * d_va;
    g_ab.v[i] = inv_n * d_cov;
  }
  out.value = sum * inv_n;

  const Image adj_mu = conv_adjoint(g_mu, a.h, a.w);
  const Image adj_a2 = conv_adjoint(g_a2, a.h, a.w);
  const Image adj_ab = conv_adjoint(g_ab, a.h, a.w);
  out.d_a = Image(a.h, a.w, a.c);
  for (size_t i = 0; i < a.v.size(); ++i)
    out.d_a.v[i] = adj_mu.v[i] + 2 * a.v[i] * adj_a2.v[i] + b.v[i] * adj_ab.v[i];
  return out;
}

}  // namespace panosplat
