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

#include "mwvqa/multiway.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mwvqa/errors.hpp"
#include "mwvqa/ops.hpp"

namespace mwvqa::multiway {

namespace {

std::size_t modality_index(Modality m) {
  switch (m) {
    case Modality::Vision:
      return 0;
    case Modality::Text:
      return 1;
  }
  throw ContractError("unknown modality tag " + std::to_string(static_cast<int>(m)));
}

Tensor broadcast_row(const Tensor& table, std::size_t row, std::size_t count) {
  const std::vector<std::size_t> ids(count, row);
  return gather_rows(table, ids);
}

std::vector<std::size_t> iota_ids(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> ids(count);
  std::iota(ids.begin(), ids.end(), begin);
  return ids;
}

}  // namespace

std::size_t default_fusion_top(std::size_t layers) { return std::min<std::size_t>(3, layers); }

void MultiwayConfig::validate() const {
  if (layers == 0) throw ConfigError("multiway: need at least one layer");
  if (d_model == 0 || d_ff == 0) throw ConfigError("multiway: widths must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("multiway: d_model " + std::to_string(d_model) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (fusion_top > layers) {
    throw ConfigError("multiway: fusion_top " + std::to_string(fusion_top) +
                      " exceeds layer count " + std::to_string(layers));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("multiway: dropout must lie in [0, 1)");
  }
  if (visual_vocab < 2 || text_vocab <= text::kNumReserved || answers == 0) {
    throw ConfigError("multiway: vocabulary sizes too small");
  }
  if (patch == 0 || image_h % patch != 0 || image_w % patch != 0) {
    throw PatchSizeError("multiway: patch size " + std::to_string(patch) +
                         " does not divide image H=" + std::to_string(image_h) +
                         " W=" + std::to_string(image_w));
  }
  if (channels == 0 || max_text_len == 0) {
    throw ConfigError("multiway: channels and max_text_len must be positive");
  }
}

MultiwayModel MultiwayModel::create(const MultiwayConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.d_model;
  MultiwayModel m;
  m.config = config;
  m.text_embed = Tensor::normal({config.text_vocab, d}, kInitStddev, rng, true);
  m.patch_proj = LinearParams::create(config.patch_dim(), d, rng);
  m.text_pos = Tensor::normal({config.max_text_len + 2, d}, kInitStddev, rng, true);
  m.patch_pos = Tensor::normal({config.num_patches(), d}, kInitStddev, rng, true);
  m.type_embed = Tensor::normal({2, d}, kInitStddev, rng, true);
  m.mask_embed = Tensor::normal({1, d}, kInitStddev, rng, true);
  for (std::size_t l = 0; l < config.layers; ++l) {
    MultiwayLayer layer;
    layer.attn_norm = LayerNormParams::create(d);
    layer.attn = AttentionParams::create(d, config.heads, rng);
    layer.vision = FeedForwardParams::create(d, config.d_ff, rng);
    layer.text = FeedForwardParams::create(d, config.d_ff, rng);
    if (config.is_fusion_layer(l)) {
      layer.fusion = FeedForwardParams::create(d, config.d_ff, rng);
    }
    m.layers.push_back(std::move(layer));
  }
  m.final_norm = LayerNormParams::create(d);
  m.text_head = LinearParams::zeros(d, config.text_vocab);
  m.visual_head = LinearParams::zeros(d, config.visual_vocab);
  m.answer_head = LinearParams::zeros(d, config.answers);
  return m;
}

NamedTensors MultiwayModel::parameters() const {
  NamedTensors out;
  out.emplace_back("mw.text_embed", text_embed);
  patch_proj.collect("mw.patch_proj", out);
  out.emplace_back("mw.text_pos", text_pos);
  out.emplace_back("mw.patch_pos", patch_pos);
  out.emplace_back("mw.type_embed", type_embed);
  out.emplace_back("mw.mask_embed", mask_embed);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "mw.layer" + std::to_string(l);
    layers[l].attn_norm.collect(p + ".attn_norm", out);
    layers[l].attn.collect(p + ".attn", out);
    layers[l].vision.collect(p + ".vision", out);
    layers[l].text.collect(p + ".text", out);
    if (layers[l].fusion) layers[l].fusion->collect(p + ".fusion", out);
  }
  final_norm.collect("mw.final_norm", out);
  text_head.collect("mw.text_head", out);
  visual_head.collect("mw.visual_head", out);
  answer_head.collect("mw.answer_head", out);
  return out;
}

Tensor multiway_block(const Tensor& tokens, const std::vector<Modality>& tags,
                      std::size_t layer_idx, const MultiwayModel& model,
                      const ForwardContext& ctx, const std::vector<bool>& key_valid) {
  if (layer_idx >= model.layers.size()) {
    throw ContractError("multiway_block: layer " + std::to_string(layer_idx) +
                        " outside a " + std::to_string(model.layers.size()) +
                        "-layer model");
  }
  if (tokens.rank() != 2 || tags.size() != tokens.dim(0)) {
    throw DimensionError("multiway_block: " + std::to_string(tags.size()) +
                         " tags for tokens " + shape_string(tokens.shape()));
  }
  std::vector<std::size_t> vision_rows, text_rows;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    (modality_index(tags[i]) == 0 ? vision_rows : text_rows).push_back(i);
  }

  const MultiwayLayer& layer = model.layers[layer_idx];
  const Tensor h = add(tokens,
                       ctx.maybe_dropout(attention(layer.attn_norm(tokens), layer.attn,
                                                   key_valid)));
  if (layer.fusion) return add(h, (*layer.fusion)(h, ctx));

  const std::size_t rows = tokens.dim(0);
  Tensor routed;
  auto route = [&](const std::vector<std::size_t>& idx, const FeedForwardParams& expert) {
    if (idx.empty()) return;
    const Tensor part = scatter_rows(expert(gather_rows(h, idx), ctx), idx, rows);
    routed = routed.defined() ? add(routed, part) : part;
  };
  route(vision_rows, layer.vision);
  route(text_rows, layer.text);
  return add(h, routed);
}

Encoded encode(const EncodeRequest& request, const MultiwayModel& model,
               const ForwardContext& ctx) {
  const MultiwayConfig& cfg = model.config;
  if (request.image == nullptr && request.text == nullptr) {
    throw ContractError("encode: need an image, a text, or both");
  }
  Encoded enc;
  std::vector<Tensor> pieces;

  // Text stream, always bracketed by <cls> and <sep>.
  std::vector<std::size_t> ids{text::kClsId};
  if (request.text) {
    const auto& t = request.text->ids;
    if (t.size() > cfg.max_text_len) {
      throw DimensionError("encode: text of " + std::to_string(t.size()) +
                           " tokens exceeds max_text_len " +
                           std::to_string(cfg.max_text_len));
    }
    ids.insert(ids.end(), t.begin(), t.end());
    for (std::size_t pos : request.masked_text) {
      if (pos >= t.size()) {
        throw RangeError("encode: masked text position " + std::to_string(pos) +
                         " outside text of length " + std::to_string(t.size()));
      }
      ids[1 + pos] = text::kMaskId;
    }
    enc.text_len = t.size();
  } else if (!request.masked_text.empty()) {
    throw ContractError("encode: text mask without text");
  }
  ids.push_back(text::kSepId);
  const std::size_t text_rows = ids.size();
  pieces.push_back(add(add(gather_rows(model.text_embed, ids),
                           gather_rows(model.text_pos, iota_ids(0, text_rows))),
                       broadcast_row(model.type_embed, modality_index(Modality::Text),
                                     text_rows)));
  enc.tags.assign(text_rows, Modality::Text);
  enc.patch_offset = text_rows;

  if (request.image) {
    if (request.image->shape() != Shape{cfg.image_h, cfg.image_w, cfg.channels}) {
      throw DimensionError("encode: image " + shape_string(request.image->shape()) +
                           " does not match configured " +
                           shape_string({cfg.image_h, cfg.image_w, cfg.channels}));
    }
    const vision::PatchGrid grid = vision::patchify(*request.image, cfg.patch);
    const std::size_t n = grid.count();
    std::vector<bool> masked(n, false);
    for (std::size_t pos : request.masked_patches) {
      if (pos >= n) {
        throw RangeError("encode: masked patch " + std::to_string(pos) +
                         " outside grid of " + std::to_string(n));
      }
      masked[pos] = true;
    }
    std::vector<std::size_t> keep, drop;
    for (std::size_t i = 0; i < n; ++i) (masked[i] ? drop : keep).push_back(i);

    Tensor patch_tokens;
    const Tensor projected = model.patch_proj(grid.patches);
    if (drop.empty()) {
      patch_tokens = projected;
    } else {
      patch_tokens = scatter_rows(broadcast_row(model.mask_embed, 0, drop.size()), drop, n);
      if (!keep.empty()) {
        patch_tokens =
            add(patch_tokens, scatter_rows(gather_rows(projected, keep), keep, n));
      }
    }
    pieces.push_back(add(add(patch_tokens, model.patch_pos),
                         broadcast_row(model.type_embed,
                                       modality_index(Modality::Vision), n)));
    enc.tags.insert(enc.tags.end(), n, Modality::Vision);
    enc.num_patches = n;
  } else if (!request.masked_patches.empty()) {
    throw ContractError("encode: patch mask without image");
  }

  Tensor x = pieces.size() == 1 ? pieces.front() : concat_rows(pieces);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    x = multiway_block(x, enc.tags, l, model, ctx);
  }
  enc.hidden = model.final_norm(x);
  return enc;
}

Encoded encode(const Tensor* image, const text::TokenSeq* text,
               const MultiwayModel& model, const ForwardContext& ctx) {
  EncodeRequest request;
  request.image = image;
  request.text = text;
  return encode(request, model, ctx);
}

Tensor mdm_loss(const MdmBatch& batch, const MultiwayModel& model,
                const ForwardContext& ctx) {
  std::vector<Tensor> text_hidden, visual_hidden;
  std::vector<std::size_t> text_targets, visual_targets;

  for (const auto& ex : batch.examples) {
    EncodeRequest request;
    if (ex.image) request.image = &*ex.image;
    if (ex.text) request.text = &*ex.text;
    request.masked_text = ex.text_mask.positions;
    request.masked_patches = ex.patch_mask.positions;
    if (!ex.patch_mask.positions.empty() &&
        ex.visual_targets.codes.size() != model.config.num_patches()) {
      throw ContractError("mdm_loss: masked patches need one visual target per patch, got " +
                          std::to_string(ex.visual_targets.codes.size()));
    }
    if (ex.text_mask.positions.empty() && ex.patch_mask.positions.empty()) continue;
    const Encoded enc = encode(request, model, ctx);

    if (!ex.text_mask.positions.empty()) {
      std::vector<std::size_t> rows;
      for (std::size_t pos : ex.text_mask.positions) {
        rows.push_back(1 + pos);
        text_targets.push_back(ex.text->ids[pos]);
      }
      text_hidden.push_back(gather_rows(enc.hidden, rows));
    }
    if (!ex.patch_mask.positions.empty()) {
      std::vector<std::size_t> rows;
      for (std::size_t pos : ex.patch_mask.positions) {
        rows.push_back(enc.patch_offset + pos);
        const std::size_t code = ex.visual_targets.codes[pos];
        if (code >= model.config.visual_vocab) {
          throw RangeError("mdm_loss: visual target " + std::to_string(code) +
                           " outside visual vocabulary of " +
                           std::to_string(model.config.visual_vocab));
        }
        visual_targets.push_back(code);
      }
      visual_hidden.push_back(gather_rows(enc.hidden, rows));
    }
  }

  const std::size_t n_text = text_targets.size();
  const std::size_t n_visual = visual_targets.size();
  if (n_text + n_visual == 0) {
    throw ContractError("mdm_loss: batch has no masked positions");
  }
  const double total = static_cast<double>(n_text + n_visual);
  Tensor loss;
  if (n_text) {
    const Tensor logits = model.text_head(concat_rows(text_hidden));
    loss = scale(cross_entropy(logits, text_targets), static_cast<double>(n_text) / total);
  }
  if (n_visual) {
    const Tensor logits = model.visual_head(concat_rows(visual_hidden));
    const Tensor part =
        scale(cross_entropy(logits, visual_targets), static_cast<double>(n_visual) / total);
    loss = loss.defined() ? add(loss, part) : part;
  }
  return loss;
}

Tensor answer_logits(const Tensor* image, const text::TokenSeq& question,
                     const MultiwayModel& model, const ForwardContext& ctx) {
  const Encoded enc = encode(image, &question, model, ctx);
  const std::vector<std::size_t> cls{0};
  return model.answer_head(gather_rows(enc.hidden, cls));
}

AnswerChoice select_from_logits(std::span<const double> logits,
                                std::span<const std::size_t> options) {
  if (options.empty()) throw ContractError("answer_select: empty option set");
  for (std::size_t id : options) {
    if (id >= logits.size()) {
      throw RangeError("answer_select: answer id " + std::to_string(id) +
                       " outside answer vocabulary of " + std::to_string(logits.size()));
    }
  }
  AnswerChoice choice;
  double mx = -INFINITY;
  for (std::size_t id : options) mx = std::max(mx, logits[id]);
  double total = 0.0;
  choice.probabilities.reserve(options.size());
  for (std::size_t id : options) {
    choice.probabilities.push_back(std::exp(logits[id] - mx));
    total += choice.probabilities.back();
  }
  for (double& p : choice.probabilities) p /= total;
  for (std::size_t i = 1; i < options.size(); ++i) {
    if (logits[options[i]] > logits[options[choice.option_index]]) {
      choice.option_index = i;
    }
  }
  choice.answer = options[choice.option_index];
  return choice;
}

AnswerChoice answer_select(const Tensor* image, const text::TokenSeq& question,
                           std::span<const std::size_t> options,
                           const MultiwayModel& model) {
  if (options.empty()) throw ContractError("answer_select: empty option set");
  const Tensor logits = answer_logits(image, question, model);
  return select_from_logits(logits.data(), options);
}

Tensor answer_loss(const Tensor& logits, std::span<const std::size_t> options,
                   std::size_t target_option) {
  if (options.empty()) throw ContractError("answer_loss: empty option set");
  if (target_option >= options.size()) {
    throw RangeError("answer_loss: target option " + std::to_string(target_option) +
                     " outside " + std::to_string(options.size()) + " options");
  }
  const std::vector<std::size_t> target{target_option};
  return cross_entropy(gather_cols(logits, options), target);
}

}  // namespace mwvqa::multiway
