#include <benchmark/benchmark.h>

#include <vector>

#include "mvp/engine.hpp"
#include "mvp/gaussian.hpp"
#include "mvp/latent.hpp"
#include "mvp/model.hpp"
#include "mvp/neural.hpp"
#include "mvp/permutation.hpp"
#include "mvp/rng.hpp"

namespace {

mvp::DiagonalGaussian random_gaussian(mvp::Index d, mvp::Rng& rng) {
  mvp::Vector m(d), lv(d);
  for (mvp::Index i = 0; i < d; ++i) {
    m(i) = rng.normal();
    lv(i) = rng.normal();
  }
  return {m, lv};
}

void BM_KlDivergence(benchmark::State& state) {
  mvp::Rng rng(1);
  const auto d = static_cast<mvp::Index>(state.range(0));
  const auto p = random_gaussian(d, rng);
  const auto q = random_gaussian(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mvp::kl_divergence(p, q));
}
BENCHMARK(BM_KlDivergence)->Arg(16)->Arg(256);

void BM_GeometricMeanFusion(benchmark::State& state) {
  mvp::Rng rng(2);
  std::vector<mvp::DiagonalGaussian> inputs;
  for (int i = 0; i < state.range(0); ++i) inputs.push_back(random_gaussian(16, rng));
  for (auto _ : state) benchmark::DoNotOptimize(mvp::geometric_mean_fusion(inputs, 16));
}
BENCHMARK(BM_GeometricMeanFusion)->Arg(3)->Arg(6);

void BM_Sattolo(benchmark::State& state) {
  mvp::Rng rng(3);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mvp::sattolo(n, rng));
}
BENCHMARK(BM_Sattolo)->Arg(3)->Arg(6);

void BM_DenseForwardBackward(benchmark::State& state) {
  mvp::Rng rng(4);
  mvp::DenseNet net({16, 1024, 256, 256, 10},
                    {mvp::Activation::relu, mvp::Activation::relu, mvp::Activation::relu, mvp::Activation::linear}, rng);
  const mvp::Matrix input = mvp::Matrix::Random(16, state.range(0));
  const mvp::Matrix grad = mvp::Matrix::Ones(10, state.range(0));
  for (auto _ : state) {
    mvp::DenseCache cache;
    benchmark::DoNotOptimize(net.forward(input, &cache));
    benchmark::DoNotOptimize(net.backward(cache, grad));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(1)->Arg(64);

// One training step's objective on a 64-sample batch of the default model.
void BM_EvaluateBatch(benchmark::State& state) {
  mvp::Rng rng(5);
  const mvp::ModelDims dims{{10, 10, 10}, 16, 16};
  mvp::ModelParams model(dims, mvp::Architecture{}, 5);
  const int size = 64;
  std::vector<mvp::SampleViews> samples(size);
  mvp::MaskMatrix masks(size, mvp::Mask{1, 1, 1});
  std::vector<std::vector<mvp::Permutation>> columns(size);
  std::vector<mvp::SampleNoise> noise;
  std::vector<mvp::BatchItem> items;
  for (int b = 0; b < size; ++b) {
    for (auto dv : dims.view_dims) samples[b].push_back(mvp::Vector::Random(dv));
    if (b % 2) masks[b][b % 3] = 0;
    const auto obs = mvp::observed_views(masks[b]);
    for (int l = 1; l <= 3; ++l) columns[b].push_back(mvp::sattolo_with_fixed_points(3, obs, rng).permutation());
    noise.push_back(mvp::draw_sample_noise(3, dims.d, dims.k, obs, rng));
  }
  for (int b = 0; b < size; ++b) items.push_back({&samples[b], masks[b], columns[b], &noise[b]});
  const auto kind = state.range(0) ? mvp::ObjectiveKind::combined : mvp::ObjectiveKind::basic;
  for (auto _ : state) {
    model.zero_grad();
    benchmark::DoNotOptimize(mvp::evaluate_batch(model, items, kind, {}, true));
  }
}
BENCHMARK(BM_EvaluateBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
