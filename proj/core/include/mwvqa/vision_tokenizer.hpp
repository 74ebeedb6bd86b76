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

#ifndef MWVQA_VISION_TOKENIZER_HPP_
#define MWVQA_VISION_TOKENIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mwvqa/layers.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/tensor.hpp"

namespace mwvqa::vision {

// Image cut into non-overlapping P x P blocks. Row i of `patches` is the
// row-major (y, x, channel) flattening of block i; blocks are numbered in
// row-major grid order.
struct PatchGrid {
  Tensor patches;  // [N x P*P*C]
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t patch = 0;
  std::size_t channels = 0;

  std::size_t count() const { return grid_h * grid_w; }
  std::size_t patch_dim() const { return patch * patch * channels; }
};

// image: [H x W x C]. Throws PatchSizeError unless P divides H and W.
PatchGrid patchify(const Tensor& image, std::size_t patch);
// Inverse of patchify, [H x W x C].
Tensor unpatchify(const PatchGrid& grid);

// patches . w_proj + pos_emb, i.e. [N x P^2C] . [P^2C x d] + [N x d].
Tensor embed_patches(const PatchGrid& grid, const Tensor& w_proj,
                     const Tensor& pos_emb);

// The visual vocabulary: K code embeddings of width D.
struct Codebook {
  Tensor embeddings;  // [K x D]

  // Rows drawn uniformly on the unit sphere.
  static Codebook uniform_sphere(std::size_t size, std::size_t dim, Rng& rng);
  static Codebook from(Tensor embeddings);

  std::size_t size() const { return embeddings.dim(0); }
  std::size_t dim() const { return embeddings.dim(1); }
};

struct VisualTokenSeq {
  std::vector<std::size_t> codes;
};

// Nearest code under L2 distance between L2-normalized vectors. Ties go to
// the lowest index.
VisualTokenSeq quantize(const Tensor& h, const Codebook& codebook);

struct VqkdConfig {
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t channels = 3;
  std::size_t patch = 4;
  std::size_t encoder_dim = 32;
  std::size_t encoder_layers = 1;
  std::size_t encoder_heads = 4;
  std::size_t codebook_size = 64;
  std::size_t code_dim = 32;
  std::size_t decoder_layers = 1;
  std::size_t decoder_heads = 4;
  std::size_t teacher_dim = 32;
  bool decoder_positions = true;

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t num_patches() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  void validate() const;
};

// Vision transformer producing one code-space vector h_i per patch.
struct VqkdEncoder {
  Tensor patch_proj;  // [P^2C x encoder_dim]
  Tensor pos_emb;     // [N x encoder_dim]
  std::vector<TransformerLayerParams> layers;
  LayerNormParams norm;
  LinearParams head;  // encoder_dim -> code_dim

  static VqkdEncoder create(const VqkdConfig& config, Rng& rng);
  Tensor operator()(const PatchGrid& grid, const ForwardContext& ctx = {}) const;
  void collect(NamedTensors& out) const;
};

// Transformer over the selected (normalized) code embeddings, projecting to
// teacher width. With zero layers it is the identity and needs
// teacher_dim == code_dim.
struct VqkdDecoder {
  Tensor pos_emb;  // [N x code_dim], undefined when positions are disabled
  std::vector<TransformerLayerParams> layers;
  LayerNormParams norm;
  LinearParams head;  // code_dim -> teacher_dim

  static VqkdDecoder create(const VqkdConfig& config, Rng& rng);
  bool identity() const { return layers.empty(); }
  Tensor operator()(const Tensor& codes_in, const ForwardContext& ctx = {}) const;
  void collect(NamedTensors& out) const;
};

// Feeds l2(v_{z_i}) for every code through the decoder.
Tensor decode_tokens(const VisualTokenSeq& tokens, const Codebook& codebook,
                     const VqkdDecoder& decoder);

struct VqkdTokenizer {
  VqkdConfig config;
  VqkdEncoder encoder;
  Codebook codebook;
  VqkdDecoder decoder;

  static VqkdTokenizer create(const VqkdConfig& config, Rng& rng);
  NamedTensors parameters() const;
  VisualTokenSeq tokenize(const Tensor& image) const;
};

// Stand-in for a pretrained teacher: a frozen random linear map of the raw
// patch pixels.
struct SyntheticTeacher {
  Tensor map;  // [P^2C x teacher_dim]

  static SyntheticTeacher create(std::size_t patch_dim, std::size_t teacher_dim,
                                 std::uint64_t seed);
  Tensor features(const PatchGrid& grid) const;
};

struct VqkdBatch {
  std::vector<Tensor> images;            // each [H x W x C]
  std::vector<Tensor> teacher_features;  // each [N x teacher_dim]
};

struct VqkdImageTrace {
  Tensor normalized_h;   // l2(h), receives the pass-through gradient
  Tensor selected;       // l2(v_z), gathered from the codebook
  Tensor decoder_input;  // carries the values of l2(v_z)
  Tensor output;         // decoder output o
  VisualTokenSeq codes;
};

struct VqkdTerms {
  Tensor loss;            // reconstruction + codebook + commitment
  Tensor reconstruction;  // -sum cos(o_i, t_i)
  Tensor codebook;        // sum ||sg[l2(h_i)] - l2(v_{z_i})||^2
  Tensor commitment;      // sum ||l2(h_i) - sg[l2(v_{z_i})]||^2
  std::vector<VqkdImageTrace> images;
};

// Pins parts of the objective for finite-difference validation. `codes`
// replaces the nearest-code lookup. When `normalized_h` and `selected` are
// also set, every stop-gradient operand is that constant and the decoder
// input becomes l2(h) + (selected - normalized_h), so the objective is an
// ordinary differentiable function whose true gradient at the captured
// point equals the straight-through gradient.
struct VqkdFreeze {
  std::vector<VisualTokenSeq> codes;
  std::vector<Tensor> normalized_h;
  std::vector<Tensor> selected;

  static VqkdFreeze capture(const VqkdTerms& terms, bool stop_gradients);
};

// Negated VQ-KD objective summed over images and patches. Encoder gradients
// arrive through the commitment term and the straight-through path from the
// decoder input; the codebook is updated only by the codebook term.
VqkdTerms vqkd_objective(const VqkdBatch& batch, const VqkdEncoder& encoder,
                         const Codebook& codebook, const VqkdDecoder& decoder,
                         std::size_t patch, const VqkdFreeze* freeze = nullptr,
                         const ForwardContext& ctx = {});

}  // namespace mwvqa::vision

#endif  // MWVQA_VISION_TOKENIZER_HPP_
