// Copyright 2026 The HyperMix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "hypermix/eval.hpp"
#include "hypermix/metatrain.hpp"

namespace {

using namespace hypermix;
using diff::Matrix;
using diff::Value;

Matrix random_matrix(RandomStream& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_MlpForwardBackward(benchmark::State& state) {
  RandomStream rng(1);
  const auto f = nets::FeatureExtractor::create(16, {64, 64}, 32, rng);
  const Matrix x = random_matrix(rng, state.range(0), 16);
  diff::ParamSet ps;
  f.mlp.register_params(ps, "F");
  for (auto _ : state) {
    ps.zero_grads();
    Value loss = diff::mean(diff::mul(f.embed(Value::constant(x)), f.embed(Value::constant(x))));
    loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(25)->Arg(64)->Arg(256);

void BM_MetatrainBatch(benchmark::State& state) {
  const data::Dataset ds = data::Dataset::generate(data::DatasetSpec{});
  RandomStream rng(2);
  auto f = nets::FeatureExtractor::create(16, {64, 64}, 32, rng);
  auto h = nets::HyperNetwork::create(32, {256, 256}, rng);
  mix::MetaTrainConfig cfg;
  cfg.method = static_cast<mix::Method>(state.range(0));
  cfg.epochs = 1;
  cfg.batches_per_epoch = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto r = mix::metatrain(f, h, ds, cfg, RandomStream(seed++));
    benchmark::DoNotOptimize(r.epoch_loss.data());
  }
}
BENCHMARK(BM_MetatrainBatch)
    ->Arg(static_cast<int>(mix::Method::kPlain))
    ->Arg(static_cast<int>(mix::Method::kHyperMix))
    ->Unit(benchmark::kMillisecond);

void BM_EvaluateEpisode(benchmark::State& state) {
  const data::Dataset ds = data::Dataset::generate(data::DatasetSpec{});
  RandomStream rng(3);
  const auto f = nets::FeatureExtractor::create(16, {64, 64}, 32, rng);
  const auto h = nets::HyperNetwork::create(32, {256, 256}, rng);
  eval::EvalConfig cfg;
  cfg.methods = {ood::ScoreMethod::kMsp, ood::ScoreMethod::kEntropy, ood::ScoreMethod::kOdin,
                 ood::ScoreMethod::kDm, ood::ScoreMethod::kPnml};
  cfg.episodes = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto out = eval::evaluate(f, &h, ds, cfg, seed++);
    benchmark::DoNotOptimize(out.records.data());
  }
}
BENCHMARK(BM_EvaluateEpisode)->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  RandomStream rng(4);
  std::vector<double> ind, ood;
  for (int i = 0; i < state.range(0); ++i) {
    ind.push_back(rng.normal() + 0.5);
    ood.push_back(rng.normal());
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::auroc(ind, ood));
}
BENCHMARK(BM_Auroc)->Arg(10)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
