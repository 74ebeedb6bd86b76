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

#include "mwvqa/layers.hpp"

#include <cmath>

#include "mwvqa/errors.hpp"
#include "mwvqa/ops.hpp"

namespace mwvqa {

Tensor ForwardContext::maybe_dropout(const Tensor& x) const {
  if (!training || dropout == 0.0) return x;
  if (rng == nullptr) throw ContractError("training forward pass needs an Rng");
  return mwvqa::dropout(x, dropout, *rng);
}

LayerNormParams LayerNormParams::create(std::size_t dim) {
  Tensor gamma({dim}, std::vector<double>(dim, 1.0), true);
  Tensor beta({dim}, true);
  return {gamma, beta};
}

Tensor LayerNormParams::operator()(const Tensor& x) const {
  return layer_norm(x, gamma, beta, kLayerNormEps);
}

void LayerNormParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

LinearParams LinearParams::create(std::size_t in, std::size_t out, Rng& rng,
                                  double stddev) {
  return {Tensor::normal({in, out}, stddev, rng, true), Tensor({out}, true)};
}

LinearParams LinearParams::zeros(std::size_t in, std::size_t out) {
  return {Tensor({in, out}, true), Tensor({out}, true)};
}

Tensor LinearParams::operator()(const Tensor& x) const {
  return add_rowwise(matmul(x, weight), bias);
}

void LinearParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

AttentionParams AttentionParams::create(std::size_t dim, std::size_t heads,
                                        Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.wq = Tensor::normal({dim, dim}, kInitStddev, rng, true);
  p.wk = Tensor::normal({dim, dim}, kInitStddev, rng, true);
  p.wv = Tensor::normal({dim, dim}, kInitStddev, rng, true);
  p.wo = Tensor::normal({dim, dim}, kInitStddev, rng, true);
  p.heads = heads;
  return p;
}

void AttentionParams::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".wv", wv);
  out.emplace_back(prefix + ".wo", wo);
}

Tensor attention(const Tensor& x, const AttentionParams& params,
                 const std::vector<bool>& key_valid) {
  if (x.rank() != 2) {
    throw DimensionError("attention: expected [T x d], got " + shape_string(x.shape()));
  }
  const std::size_t tokens = x.dim(0), dim = x.dim(1);
  if (params.heads == 0 || dim % params.heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(params.heads) +
                      " heads");
  }
  if (params.wq.shape() != Shape{dim, dim}) {
    throw DimensionError("attention: projection " + shape_string(params.wq.shape()) +
                         " does not fit input " + shape_string(x.shape()));
  }
  const std::vector<bool> valid =
      key_valid.empty() ? std::vector<bool>(tokens, true) : key_valid;
  const std::size_t head_dim = dim / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Tensor q = matmul(x, params.wq);
  const Tensor k = matmul(x, params.wk);
  const Tensor v = matmul(x, params.wv);

  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const std::size_t b = h * head_dim, e = b + head_dim;
    const Tensor qh = params.heads == 1 ? q : slice_cols(q, b, e);
    const Tensor kh = params.heads == 1 ? k : slice_cols(k, b, e);
    const Tensor vh = params.heads == 1 ? v : slice_cols(v, b, e);
    const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    heads.push_back(matmul(masked_softmax(scores, valid), vh));
  }
  const Tensor merged = params.heads == 1 ? heads.front() : concat_cols(heads);
  return matmul(merged, params.wo);
}

FeedForwardParams FeedForwardParams::create(std::size_t dim, std::size_t hidden,
                                            Rng& rng) {
  FeedForwardParams p;
  p.norm = LayerNormParams::create(dim);
  p.in = LinearParams::create(dim, hidden, rng);
  p.out = LinearParams::create(hidden, dim, rng);
  return p;
}

Tensor FeedForwardParams::operator()(const Tensor& x, const ForwardContext& ctx) const {
  return ctx.maybe_dropout(out(gelu(in(norm(x)))));
}

void FeedForwardParams::collect(const std::string& prefix, NamedTensors& out_list) const {
  norm.collect(prefix + ".norm", out_list);
  in.collect(prefix + ".in", out_list);
  out.collect(prefix + ".out", out_list);
}

TransformerLayerParams TransformerLayerParams::create(std::size_t dim,
                                                      std::size_t heads,
                                                      std::size_t hidden,
                                                      Rng& rng) {
  TransformerLayerParams p;
  p.attn_norm = LayerNormParams::create(dim);
  p.attn = AttentionParams::create(dim, heads, rng);
  p.ffn = FeedForwardParams::create(dim, hidden, rng);
  return p;
}

Tensor TransformerLayerParams::operator()(const Tensor& x,
                                          const ForwardContext& ctx) const {
  const Tensor h = add(x, ctx.maybe_dropout(attention(attn_norm(x), attn)));
  return add(h, ffn(h, ctx));
}

void TransformerLayerParams::collect(const std::string& prefix,
                                     NamedTensors& out) const {
  attn_norm.collect(prefix + ".attn_norm", out);
  attn.collect(prefix + ".attn", out);
  ffn.collect(prefix + ".ffn", out);
}

}  // namespace mwvqa
