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

#ifndef MWVQA_LAYERS_HPP_
#define MWVQA_LAYERS_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mwvqa/rng.hpp"
#include "mwvqa/tensor.hpp"

namespace mwvqa {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStddev = 0.02;

// Training flag plus the randomness dropout draws from. Inference passes
// the default (training off, no RNG needed).
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;

  Tensor maybe_dropout(const Tensor& x) const;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams create(std::size_t dim);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct LinearParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static LinearParams create(std::size_t in, std::size_t out, Rng& rng,
                             double stddev = kInitStddev);
  static LinearParams zeros(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Shared multi-head self-attention projections, row-vector convention
// (x . Wq and so on). No biases.
struct AttentionParams {
  Tensor wq, wk, wv, wo;  // [d x d] each
  std::size_t heads = 1;

  static AttentionParams create(std::size_t dim, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Bidirectional scaled dot-product attention over x [T x d]. Positions with
// key_valid[j] == false receive exactly zero attention weight from every
// query. An empty key_valid means no padding.
Tensor attention(const Tensor& x, const AttentionParams& params,
                 const std::vector<bool>& key_valid = {});

// Position-wise feed-forward expert: own layer norm, then
// Linear -> GeLU -> Linear.
struct FeedForwardParams {
  LayerNormParams norm;
  LinearParams in;
  LinearParams out;

  static FeedForwardParams create(std::size_t dim, std::size_t hidden, Rng& rng);
  // Applies norm, expansion, GeLU, and projection (no residual).
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Plain pre-LN transformer layer used by the tokenizer encoder and decoder.
struct TransformerLayerParams {
  LayerNormParams attn_norm;
  AttentionParams attn;
  FeedForwardParams ffn;

  static TransformerLayerParams create(std::size_t dim, std::size_t heads,
                                       std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedTensors& out) const;
};

}  // namespace mwvqa

#endif  // MWVQA_LAYERS_HPP_
