// Copyright 2026 The mwvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "mwvqa/layers.hpp"
#include "mwvqa/ops.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/tensor.hpp"

namespace {

using namespace mwvqa;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const Tensor a = Tensor::normal({n, n}, 1.0, rng);
  const Tensor b = Tensor::normal({n, n}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  Tensor a = Tensor::normal({n, n}, 1.0, rng, true);
  Tensor b = Tensor::normal({n, n}, 1.0, rng, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    sum(matmul(a, b)).backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64);

void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng(0);
  const Tensor x = Tensor::normal({64, 64}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, 1));
}
BENCHMARK(BM_SoftmaxRows);

void BM_LayerNorm(benchmark::State& state) {
  Rng rng(0);
  const Tensor x = Tensor::normal({64, 64}, 1.0, rng);
  const Tensor gamma = Tensor::normal({64}, 1.0, rng);
  const Tensor beta = Tensor::normal({64}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(layer_norm(x, gamma, beta, kLayerNormEps));
}
BENCHMARK(BM_LayerNorm);

}  // namespace

BENCHMARK_MAIN();
