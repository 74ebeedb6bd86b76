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

#ifndef MWVQA_MULTIWAY_HPP_
#define MWVQA_MULTIWAY_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mwvqa/layers.hpp"
#include "mwvqa/masking.hpp"
#include "mwvqa/text_tokenizer.hpp"
#include "mwvqa/vision_tokenizer.hpp"

namespace mwvqa::multiway {

enum class Modality : std::uint8_t { Vision = 0, Text = 1 };

struct MultiwayConfig {
  std::size_t layers = 4;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  // Number of top layers whose FFN is the shared vision-language expert.
  std::size_t fusion_top = 3;
  double dropout = 0.4;
  std::size_t visual_vocab = 64;
  std::size_t text_vocab = 64;
  std::size_t answers = 2;
  std::size_t max_text_len = 32;
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t channels = 3;
  std::size_t patch = 4;

  std::size_t num_patches() const { return (image_h / patch) * (image_w / patch); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  bool is_fusion_layer(std::size_t layer) const { return layer + fusion_top >= layers; }
  void validate() const;
};

// Same as min(3, layers): the default count of fusion layers.
std::size_t default_fusion_top(std::size_t layers);

struct MultiwayLayer {
  LayerNormParams attn_norm;
  AttentionParams attn;  // shared by every modality
  FeedForwardParams vision;
  FeedForwardParams text;
  std::optional<FeedForwardParams> fusion;  // top fusion_top layers only
};

struct MultiwayModel {
  MultiwayConfig config;
  Tensor text_embed;        // [text_vocab x d]
  LinearParams patch_proj;  // [P^2C x d]
  Tensor text_pos;          // [(max_text_len + 2) x d], covers <cls> and <sep>
  Tensor patch_pos;         // [N x d]
  Tensor type_embed;        // [2 x d], indexed by Modality
  Tensor mask_embed;        // [1 x d], replaces masked patches
  std::vector<MultiwayLayer> layers;
  LayerNormParams final_norm;
  LinearParams text_head;    // d -> text_vocab, zero-initialized
  LinearParams visual_head;  // d -> visual_vocab, zero-initialized
  LinearParams answer_head;  // d -> answers, zero-initialized

  static MultiwayModel create(const MultiwayConfig& config, Rng& rng);
  NamedTensors parameters() const;
};

// Shared attention over the whole sequence, then one FFN expert per token:
// the fusion expert for every token in fusion layers, otherwise the vision
// or language expert picked by the token's tag. Pre-LN residual form.
Tensor multiway_block(const Tensor& tokens, const std::vector<Modality>& tags,
                      std::size_t layer_idx, const MultiwayModel& model,
                      const ForwardContext& ctx = {},
                      const std::vector<bool>& key_valid = {});

struct EncodeRequest {
  const Tensor* image = nullptr;           // [H x W x C] or absent
  const text::TokenSeq* text = nullptr;    // ordinary ids, no <cls>/<sep>
  std::vector<std::size_t> masked_text;    // indices into text->ids
  std::vector<std::size_t> masked_patches; // indices into the patch grid
};

struct Encoded {
  Tensor hidden;  // [T x d] after the final layer norm
  std::vector<Modality> tags;
  std::size_t text_len = 0;      // ordinary text tokens, at rows 1..text_len
  std::size_t patch_offset = 0;  // first patch row (2 + text_len)
  std::size_t num_patches = 0;
};

// Sequence layout: <cls>, text tokens, <sep>, then patch tokens. Each
// token gets a position embedding and a modality-type embedding. Masked
// text ids become <mask>; masked patches take the learned mask embedding.
Encoded encode(const EncodeRequest& request, const MultiwayModel& model,
               const ForwardContext& ctx = {});
Encoded encode(const Tensor* image, const text::TokenSeq* text,
               const MultiwayModel& model, const ForwardContext& ctx = {});

struct MdmExample {
  std::optional<Tensor> image;
  std::optional<text::TokenSeq> text;
  masking::MaskSet text_mask;
  masking::MaskSet patch_mask;
  vision::VisualTokenSeq visual_targets;  // one code per patch
};

struct MdmBatch {
  std::vector<MdmExample> examples;
};

// Mean cross-entropy over every masked position in the batch: text head
// against the original ids, visual head against the visual codes.
Tensor mdm_loss(const MdmBatch& batch, const MultiwayModel& model,
                const ForwardContext& ctx = {});

// [1 x answers] logits from the <cls> representation.
Tensor answer_logits(const Tensor* image, const text::TokenSeq& question,
                     const MultiwayModel& model, const ForwardContext& ctx = {});

struct AnswerChoice {
  std::size_t answer = 0;              // answer id
  std::size_t option_index = 0;        // position of `answer` in the options
  std::vector<double> probabilities;   // softmax restricted to the options
};

// argmax over the options of the renormalized answer distribution; ties go
// to the earliest option.
AnswerChoice select_from_logits(std::span<const double> logits,
                                std::span<const std::size_t> options);
AnswerChoice answer_select(const Tensor* image, const text::TokenSeq& question,
                           std::span<const std::size_t> options,
                           const MultiwayModel& model);

// -log P(options[target] | image, question, options).
Tensor answer_loss(const Tensor& logits, std::span<const std::size_t> options,
                   std::size_t target_option);

}  // namespace mwvqa::multiway

#endif  // MWVQA_MULTIWAY_HPP_
