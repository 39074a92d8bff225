#include <benchmark/benchmark.h>

#include "panosplat/losses.hpp"
#include "panosplat/render.hpp"
#include "panosplat/rng.hpp"
#include "panosplat/ssim.hpp"

using namespace panosplat;

namespace {

GaussianCloud random_cloud(size_t n, uint64_t seed) {
  Rng rng(seed);
  GaussianCloud c;
  c.resize(n);
  for (size_t i = 0; i < n; ++i) {
    c.mu[i] = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
               rng.uniform(-1.5, 1.5)};
    Eigen::Vector4d q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    c.rot[i] = q.normalized();
    c.log_scale[i] = {rng.uniform(-4.0, -2.5), rng.uniform(-4.0, -2.5),
                      rng.uniform(-5.5, -3.5)};
    c.opacity_logit[i] = rng.uniform(-2.0, 2.0);
    c.sh_dc[i] = {rng.normal(), rng.normal(), rng.normal()};
    c.sh_rest[i].setZero();
  }
  return c;
}

Pose look_origin() {
  Pose p;
  p.R = Eigen::Matrix3d::Identity();
  p.t = Eigen::Vector3d(0, 0, 3.0);
  return p;
}

Intrinsics intr(int res) {
  Intrinsics K;
  K.fx = K.fy = 0.7 * res;
  K.cx = K.cy = res / 2.0;
  return K;
}

void BM_render_forward(benchmark::State& state) {
  const int res = 128;
  const GaussianCloud cloud = random_cloud(state.range(0), 7);
  const Pose pose = look_origin();
  for (auto _ : state) {
    RenderOutput out = render(cloud, pose, nullptr, intr(res), res, res);
    benchmark::DoNotOptimize(out.color.v.data());
  }
}
BENCHMARK(BM_render_forward)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_render_backward(benchmark::State& state) {
  const int res = 128;
  const GaussianCloud cloud = random_cloud(state.range(0), 7);
  const Pose pose = look_origin();
  ResidualPose residual;
  RenderCache cache;
  render(cloud, pose, &residual, intr(res), res, res, nullptr, &cache);
  Image dL(res, res, 3, 1e-3);
  for (auto _ : state) {
    Gradients g = backward(cloud, cache, dL, {}, {});
    benchmark::DoNotOptimize(g.d_mu.data());
  }
}
BENCHMARK(BM_render_backward)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ssim_grad(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  Rng rng(11);
  Image a(res, res, 3), b(res, res, 3);
  for (auto& v : a.v) v = rng.uniform();
  for (auto& v : b.v) v = rng.uniform();
  for (auto _ : state) {
    SsimGrad g = ssim_with_grad(a, b);
    benchmark::DoNotOptimize(g.d_a.v.data());
  }
}
BENCHMARK(BM_ssim_grad)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
