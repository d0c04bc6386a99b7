#include <benchmark/benchmark.h>

#include <random>

#include "cst/correlation/correlation.hpp"
#include "cst/episodes/episode.hpp"
#include "cst/numerics/ops.hpp"
#include "cst/objective/objective.hpp"
#include "cst/trainer/model.hpp"

namespace {

using namespace cst;

struct Fixture {
  data::SyntheticDataset ds = data::generate_synthetic_dataset({40, 10, 10, 4, 16, 16, 3});
  data::DatasetView view{ds.train, backbone::BackboneConfig{}};
  std::shared_ptr<const backbone::TokenBundle> query = view.tokens(0);
  std::shared_ptr<const backbone::TokenBundle> support = view.support_tokens(1, 12, 12);
  MaskMap mask = MaskMap::zeros(12, 12);
  Fixture() {
    for (std::size_t i = 0; i < 40; ++i) mask.values[i] = 1.0;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Correlate(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(corr::correlate(*f.query, *f.support));
}
BENCHMARK(BM_Correlate)->Unit(benchmark::kMillisecond);

void BM_ForwardPair(benchmark::State& state) {
  auto& f = fixture();
  train::ModelConfig mc;
  mc.out_channels = static_cast<std::size_t>(state.range(0));
  const auto params = train::init_model(mc, f.view.backbone(), 1);
  num::NoGradGuard guard;
  for (auto _ : state)
    benchmark::DoNotOptimize(train::forward_pair(params, mc, *f.query, *f.support, f.mask, 16, 16));
}
BENCHMARK(BM_ForwardPair)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto& f = fixture();
  train::ModelConfig mc;
  mc.out_channels = static_cast<std::size_t>(state.range(0));
  auto params = train::init_model(mc, f.view.backbone(), 1);
  const auto target = MaskMap::zeros(16, 16);
  for (auto _ : state) {
    auto pred = train::forward_pair(params, mc, *f.query, *f.support, f.mask, 16, 16);
    auto loss = objective::compute_loss(pred, true, target);
    num::backward(loss.total);
    num::adam_step(params, 1e-3);
  }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Conv3x3(benchmark::State& state) {
  const std::size_t c = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(c * 16 * 16), w(c * c * 9), b(c);
  for (auto& v : x) v = g(rng);
  for (auto& v : w) v = g(rng);
  const auto xt = num::Tensor::from({c, 16, 16}, x);
  const auto wt = num::Tensor::from({c, c, 3, 3}, w);
  const auto bt = num::Tensor::from({c}, b);
  for (auto _ : state) benchmark::DoNotOptimize(num::ops::conv2d(xt, wt, bt));
}
BENCHMARK(BM_Conv3x3)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
