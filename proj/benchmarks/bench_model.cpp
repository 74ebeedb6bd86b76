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

#include <vector>

#include "mwvqa/multiway.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/text_tokenizer.hpp"
#include "mwvqa/vision_tokenizer.hpp"

namespace {

using namespace mwvqa;

// Desk-scale model matching the shipped toy configuration.
multiway::MultiwayConfig toy_model() {
  multiway::MultiwayConfig cfg;
  cfg.layers = 3;
  cfg.d_model = 32;
  cfg.heads = 4;
  cfg.d_ff = 64;
  cfg.fusion_top = 1;
  cfg.dropout = 0.0;
  cfg.visual_vocab = 16;
  cfg.text_vocab = 64;
  cfg.answers = 10;
  cfg.max_text_len = 16;
  return cfg;
}

struct ToyInput {
  Tensor image;
  text::TokenSeq question;
};

ToyInput toy_input(Rng& rng) {
  ToyInput in{Tensor(Shape{16, 16, 3}), {}};
  for (double& v : in.image.mutable_data()) v = rng.uniform();
  for (std::size_t i = 0; i < 6; ++i) {
    in.question.ids.push_back(text::kNumReserved + rng.uniform_index(64 - text::kNumReserved));
  }
  return in;
}

void BM_MultiwayForward(benchmark::State& state) {
  Rng rng(0);
  const multiway::MultiwayModel model = multiway::MultiwayModel::create(toy_model(), rng);
  const ToyInput in = toy_input(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(multiway::answer_logits(&in.image, in.question, model));
  }
}
BENCHMARK(BM_MultiwayForward);

void BM_MultiwayForwardBackward(benchmark::State& state) {
  Rng rng(0);
  const multiway::MultiwayModel model = multiway::MultiwayModel::create(toy_model(), rng);
  const ToyInput in = toy_input(rng);
  const std::vector<std::size_t> options = {0, 1, 2};
  for (auto _ : state) {
    const Tensor logits = multiway::answer_logits(&in.image, in.question, model);
    multiway::answer_loss(logits, options, 1).backward();
  }
}
BENCHMARK(BM_MultiwayForwardBackward);

void BM_Quantize(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const vision::Codebook codebook = vision::Codebook::uniform_sphere(k, 32, rng);
  const Tensor h = Tensor::normal({196, 32}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(vision::quantize(h, codebook));
}
BENCHMARK(BM_Quantize)->Arg(64)->Arg(1024);

}  // namespace
