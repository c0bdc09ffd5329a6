#include <benchmark/benchmark.h>

#include <random>

#include "upisp/mapper/heads.hpp"
#include "upisp/objective/losses.hpp"
#include "upisp/otmatch/sinkhorn.hpp"
#include "upisp/quality/metrics.hpp"

using namespace upisp;

namespace {

template <class Image = RgbImage>
Image random_image(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(side, side);
  for (double& v : img.data()) v = u(rng);
  return img;
}

void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ot::Matrix c(n, n);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  const ot::Vector a = ot::uniform_marginal(n);
  for (auto _ : state) benchmark::DoNotOptimize(ot::sinkhorn(c, a, a, {}));
}
BENCHMARK(BM_Sinkhorn)->Arg(16)->Arg(64)->Arg(256);

void BM_HistLossUv(benchmark::State& state) {
  const RgbImage p = random_image(static_cast<int>(state.range(0)), 2), q = random_image(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(objective::hist_loss_uv(p, q));
}
BENCHMARK(BM_HistLossUv)->Arg(32)->Arg(128);

void BM_TotalLoss(benchmark::State& state) {
  const RgbImage p = random_image(64, 4), q = random_image(64, 5);
  const auto w = objective::LossWeights::stage2();
  for (auto _ : state) benchmark::DoNotOptimize(objective::total_loss(p, q, w));
}
BENCHMARK(BM_TotalLoss);

void BM_CnnForward(benchmark::State& state) {
  const mapper::ResidualCnnHead head(0);
  const RgbImage x = random_image(static_cast<int>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(head.forward(x));
}
BENCHMARK(BM_CnnForward)->Arg(32)->Arg(64);

void BM_CnnBackward(benchmark::State& state) {
  const mapper::ResidualCnnHead head(0);
  const RgbImage x = random_image(32, 7);
  const RgbGrad up = random_image<RgbGrad>(32, 8);
  std::vector<double> g(head.parameter_count());
  for (auto _ : state) benchmark::DoNotOptimize(head.backward(x, up, g));
}
BENCHMARK(BM_CnnBackward);

void BM_Ssim(benchmark::State& state) {
  const RgbImage a = random_image(static_cast<int>(state.range(0)), 9), b = random_image(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(quality::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
