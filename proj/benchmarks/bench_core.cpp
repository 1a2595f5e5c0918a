#include <benchmark/benchmark.h>

#include <random>

#include "shvit/augment.hpp"
#include "shvit/ops.hpp"
#include "shvit/reid_eval.hpp"
#include "shvit/rng.hpp"
#include "shvit/vit.hpp"

using namespace shvit;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> n;
  std::vector<double> v(rows * cols);
  for (double& x : v) x = n(eng);
  return Tensor::matrix(rows, cols, std::move(v));
}

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(3, h, w);
  for (double& v : img.pixels) v = u(eng);
  return img;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Graph g(Graph::Mode::inference);
    benchmark::DoNotOptimize(ops::matmul(g, a, b));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128);

static void BM_VitForwardEval(benchmark::State& state) {
  const VisionTransformer m(ModelConfig::preset("vit-tiny"), 1);
  const Tensor img = to_tensor(random_image(16, 8, 3));
  for (auto _ : state) {
    Graph g(Graph::Mode::inference);
    benchmark::DoNotOptimize(m.forward(g, img, {}).descriptor);
  }
}
BENCHMARK(BM_VitForwardEval);

static void BM_VitTrainStep(benchmark::State& state) {
  const VisionTransformer m(ModelConfig::preset("vit-tiny"), 1);
  const Tensor img = to_tensor(random_image(16, 8, 4));
  const std::vector<std::size_t> label{3};
  Rng rng(5);
  ForwardOptions opt;
  opt.mode = RunMode::train;
  opt.rng = &rng;
  for (auto _ : state) {
    Graph g;
    const ForwardOutput out = m.forward(g, img, opt);
    Tensor loss = ops::cross_entropy(g, ops::reshape(g, out.logits, {1, out.logits.size()}), label);
    g.backward(loss);
  }
}
BENCHMARK(BM_VitTrainStep);

static void BM_Evaluate(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0)), ng = 10 * nq;
  std::mt19937_64 eng(6);
  std::vector<SampleMeta> q(nq), g(ng);
  for (auto& m : q) m = {static_cast<int>(eng() % 50), 1 + static_cast<int>(eng() % 6), ""};
  for (auto& m : g) m = {static_cast<int>(eng() % 50), 1 + static_cast<int>(eng() % 6), ""};
  const DistanceMatrix d = distance_matrix(random_matrix(nq, 64, 7), random_matrix(ng, 64, 8), Metric::cosine);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(d, q, g, {}));
}
BENCHMARK(BM_Evaluate)->Arg(50)->Arg(200);

static void BM_GaussianBlur(benchmark::State& state) {
  const Image img = random_image(128, 64, 9);
  const double sigma = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(img, sigma));
}
BENCHMARK(BM_GaussianBlur)->Arg(5)->Arg(20);

static void BM_AugmentPipeline(benchmark::State& state) {
  const Image img = random_image(16, 8, 10);
  const AugmentConfig cfg;
  Rng rng(11);
  for (auto _ : state) benchmark::DoNotOptimize(apply_pipeline(img, cfg, rng));
}
BENCHMARK(BM_AugmentPipeline);
BENCHMARK_MAIN();
