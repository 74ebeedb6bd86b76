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

#ifndef MWVQA_OPS_HPP_
#define MWVQA_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "mwvqa/tensor.hpp"

namespace mwvqa {

class Rng;

// Matrix product of rank-2 tensors, [m x k] . [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise, identical shapes only.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Adds a length-n vector to every row of an [m x n] tensor.
Tensor add_rowwise(const Tensor& a, const Tensor& row);

// Exact GeLU, x * Phi(x).
Tensor gelu(const Tensor& x);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

// Row softmax over an [m x n] score matrix where columns with
// key_valid[j] == false get exactly zero weight. Every row needs at least
// one valid column.
Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& key_valid);

// Normalizes over the last axis, then applies gamma/beta. Rows whose values
// are all identical normalize to exactly zero.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);

// Scales each slice along the last axis to unit L2 norm; all-zero slices
// stay zero.
Tensor l2_normalize(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduces the last axis: [... x n] -> [...] (rank-1 input gives a scalar).
Tensor sum_last(const Tensor& x);

// Row lookup: out[i] = table[ids[i]].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// Inverse placement: out has `rows` rows, zeros except out[ids[i]] = src[i].
// ids must be distinct.
Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> ids,
                    std::size_t rows);
// Column lookup on an [m x n] tensor: out[:, j] = x[:, cols[j]].
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols);

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

// Inverted dropout. rate == 0 returns the input unchanged.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Forward identity, no gradient.
Tensor stop_gradient(const Tensor& x);

// Forward: the values of `forward_value`. Backward: the incoming gradient is
// handed unchanged to `gradient_target`, and `forward_value` receives none.
Tensor straight_through(const Tensor& gradient_target,
                        const Tensor& forward_value);

}  // namespace mwvqa

#endif  // MWVQA_OPS_HPP_
