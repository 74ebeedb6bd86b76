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

#include <string>
#include <vector>

#include "mwvqa/masking.hpp"
#include "mwvqa/metrics.hpp"

namespace {

using namespace mwvqa;

void BM_MaskBlockwise(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(masking::mask_blockwise(14, 14, 0.4, 16, seed++));
  }
}
BENCHMARK(BM_MaskBlockwise);

void BM_MaskText(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(masking::mask_text(128, 0.15, seed++));
}
BENCHMARK(BM_MaskText);

void BM_ScoreExample(benchmark::State& state) {
  const metrics::Taxonomy taxonomy = metrics::Taxonomy::from_edges({{"entity", "animal"},
                                                                    {"animal", "dog"},
                                                                    {"animal", "cat"},
                                                                    {"entity", "color"},
                                                                    {"color", "red"},
                                                                    {"color", "blue"}});
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"dog", "cat"}, {"red dog", "blue cat"}, {"Cat", "cat"}, {"blue", "red"}};
  for (auto _ : state) {
    for (const auto& [pred, gold] : pairs) {
      benchmark::DoNotOptimize(metrics::score_example(pred, gold, &taxonomy));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_ScoreExample);

}  // namespace
