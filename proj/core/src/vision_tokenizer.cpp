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

#include "mwvqa/vision_tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mwvqa/errors.hpp"
#include "mwvqa/ops.hpp"

namespace mwvqa::vision {

PatchGrid patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 3) {
    throw DimensionError("patchify: expected [H x W x C], got " +
                         shape_string(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw PatchSizeError("patchify: patch size " + std::to_string(patch) +
                         " does not divide image H=" + std::to_string(h) +
                         " W=" + std::to_string(w));
  }
  PatchGrid grid;
  grid.grid_h = h / patch;
  grid.grid_w = w / patch;
  grid.patch = patch;
  grid.channels = c;
  const std::size_t pd = grid.patch_dim();
  const auto src = image.data();
  std::vector<double> rows(grid.count() * pd);
  for (std::size_t gy = 0; gy < grid.grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
      double* dst = rows.data() + (gy * grid.grid_w + gx) * pd;
      for (std::size_t y = 0; y < patch; ++y) {
        const std::size_t offset = ((gy * patch + y) * w + gx * patch) * c;
        std::copy_n(src.data() + offset, patch * c, dst + y * patch * c);
      }
    }
  }
  grid.patches = Tensor({grid.count(), pd}, std::move(rows));
  return grid;
}

Tensor unpatchify(const PatchGrid& grid) {
  const std::size_t p = grid.patch, c = grid.channels;
  const std::size_t h = grid.grid_h * p, w = grid.grid_w * p;
  const std::size_t pd = grid.patch_dim();
  const auto src = grid.patches.data();
  std::vector<double> image(h * w * c);
  for (std::size_t gy = 0; gy < grid.grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
      const double* block = src.data() + (gy * grid.grid_w + gx) * pd;
      for (std::size_t y = 0; y < p; ++y) {
        const std::size_t offset = ((gy * p + y) * w + gx * p) * c;
        std::copy_n(block + y * p * c, p * c, image.data() + offset);
      }
    }
  }
  return Tensor({h, w, c}, std::move(image));
}

Tensor embed_patches(const PatchGrid& grid, const Tensor& w_proj,
                     const Tensor& pos_emb) {
  if (w_proj.rank() != 2 || w_proj.dim(0) != grid.patch_dim()) {
    throw DimensionError("embed_patches: projection " + shape_string(w_proj.shape()) +
                         " does not accept patches " +
                         shape_string(grid.patches.shape()));
  }
  if (pos_emb.shape() != Shape{grid.count(), w_proj.dim(1)}) {
    throw DimensionError("embed_patches: positions " + shape_string(pos_emb.shape()) +
                         " expected " +
                         shape_string({grid.count(), w_proj.dim(1)}));
  }
  return add(matmul(grid.patches, w_proj), pos_emb);
}

Codebook Codebook::uniform_sphere(std::size_t size, std::size_t dim, Rng& rng) {
  if (size < 2) throw ConfigError("codebook needs at least 2 entries");
  Tensor raw = Tensor::normal({size, dim}, 1.0, rng);
  Tensor unit = l2_normalize(raw).detach();
  unit.set_requires_grad(true);
  return {unit};
}

Codebook Codebook::from(Tensor embeddings) {
  if (embeddings.rank() != 2 || embeddings.dim(0) < 2) {
    throw ConfigError("codebook needs a [K x D] table with K >= 2, got " +
                      shape_string(embeddings.shape()));
  }
  return {std::move(embeddings)};
}

VisualTokenSeq quantize(const Tensor& h, const Codebook& codebook) {
  if (h.rank() != 2 || h.dim(1) != codebook.dim()) {
    throw DimensionError("quantize: features " + shape_string(h.shape()) +
                         " vs codebook " + shape_string(codebook.embeddings.shape()));
  }
  const Tensor hn = l2_normalize(h.detach());
  const Tensor vn = l2_normalize(codebook.embeddings.detach());
  const std::size_t n = hn.dim(0), k = vn.dim(0), d = vn.dim(1);
  const auto hd = hn.data();
  const auto vd = vn.data();
  VisualTokenSeq out;
  out.codes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (std::size_t j = 0; j < k; ++j) {
      double dist = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = hd[i * d + c] - vd[j * d + c];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    out.codes[i] = best;
  }
  return out;
}

void VqkdConfig::validate() const {
  if (patch == 0 || image_h % patch != 0 || image_w % patch != 0) {
    throw PatchSizeError("tokenizer: patch size " + std::to_string(patch) +
                         " does not divide image H=" + std::to_string(image_h) +
                         " W=" + std::to_string(image_w));
  }
  if (channels == 0 || encoder_dim == 0 || code_dim == 0 || teacher_dim == 0) {
    throw ConfigError("tokenizer: dimensions must be positive");
  }
  if (codebook_size < 2) throw ConfigError("tokenizer: codebook needs K >= 2");
  if (encoder_heads == 0 || encoder_dim % encoder_heads != 0) {
    throw ConfigError("tokenizer: encoder width " + std::to_string(encoder_dim) +
                      " not divisible by " + std::to_string(encoder_heads) + " heads");
  }
  if (decoder_layers > 0 && (decoder_heads == 0 || code_dim % decoder_heads != 0)) {
    throw ConfigError("tokenizer: code width " + std::to_string(code_dim) +
                      " not divisible by " + std::to_string(decoder_heads) + " heads");
  }
  if (decoder_layers == 0 && teacher_dim != code_dim) {
    throw ConfigError("tokenizer: an identity decoder needs teacher_dim == code_dim");
  }
}

VqkdEncoder VqkdEncoder::create(const VqkdConfig& config, Rng& rng) {
  VqkdEncoder e;
  e.patch_proj = Tensor::normal({config.patch_dim(), config.encoder_dim},
                                kInitStddev, rng, true);
  e.pos_emb = Tensor::normal({config.num_patches(), config.encoder_dim},
                             kInitStddev, rng, true);
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    e.layers.push_back(TransformerLayerParams::create(
        config.encoder_dim, config.encoder_heads, 4 * config.encoder_dim, rng));
  }
  e.norm = LayerNormParams::create(config.encoder_dim);
  e.head = LinearParams::create(config.encoder_dim, config.code_dim, rng);
  return e;
}

Tensor VqkdEncoder::operator()(const PatchGrid& grid, const ForwardContext& ctx) const {
  Tensor x = embed_patches(grid, patch_proj, pos_emb);
  for (const auto& layer : layers) x = layer(x, ctx);
  return head(norm(x));
}

void VqkdEncoder::collect(NamedTensors& out) const {
  out.emplace_back("tok.enc.patch_proj", patch_proj);
  out.emplace_back("tok.enc.pos_emb", pos_emb);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect("tok.enc.layer" + std::to_string(i), out);
  }
  norm.collect("tok.enc.norm", out);
  head.collect("tok.enc.head", out);
}

VqkdDecoder VqkdDecoder::create(const VqkdConfig& config, Rng& rng) {
  VqkdDecoder d;
  if (config.decoder_layers == 0) return d;
  if (config.decoder_positions) {
    d.pos_emb = Tensor::normal({config.num_patches(), config.code_dim},
                               kInitStddev, rng, true);
  }
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    d.layers.push_back(TransformerLayerParams::create(
        config.code_dim, config.decoder_heads, 4 * config.code_dim, rng));
  }
  d.norm = LayerNormParams::create(config.code_dim);
  d.head = LinearParams::create(config.code_dim, config.teacher_dim, rng);
  return d;
}

Tensor VqkdDecoder::operator()(const Tensor& codes_in, const ForwardContext& ctx) const {
  if (identity()) return codes_in;
  Tensor x = pos_emb.defined() ? add(codes_in, pos_emb) : codes_in;
  for (const auto& layer : layers) x = layer(x, ctx);
  return head(norm(x));
}

void VqkdDecoder::collect(NamedTensors& out) const {
  if (identity()) return;
  if (pos_emb.defined()) out.emplace_back("tok.dec.pos_emb", pos_emb);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect("tok.dec.layer" + std::to_string(i), out);
  }
  norm.collect("tok.dec.norm", out);
  head.collect("tok.dec.head", out);
}

Tensor decode_tokens(const VisualTokenSeq& tokens, const Codebook& codebook,
                     const VqkdDecoder& decoder) {
  for (std::size_t code : tokens.codes) {
    if (code >= codebook.size()) {
      throw RangeError("decode_tokens: code " + std::to_string(code) +
                       " outside codebook of size " + std::to_string(codebook.size()));
    }
  }
  const Tensor selected = l2_normalize(gather_rows(codebook.embeddings, tokens.codes));
  return decoder(selected);
}

VqkdTokenizer VqkdTokenizer::create(const VqkdConfig& config, Rng& rng) {
  config.validate();
  VqkdTokenizer t;
  t.config = config;
  t.encoder = VqkdEncoder::create(config, rng);
  t.codebook = Codebook::uniform_sphere(config.codebook_size, config.code_dim, rng);
  t.decoder = VqkdDecoder::create(config, rng);
  return t;
}

NamedTensors VqkdTokenizer::parameters() const {
  NamedTensors out;
  encoder.collect(out);
  out.emplace_back("tok.codebook", codebook.embeddings);
  decoder.collect(out);
  return out;
}

VisualTokenSeq VqkdTokenizer::tokenize(const Tensor& image) const {
  return quantize(encoder(patchify(image, config.patch)), codebook);
}

SyntheticTeacher SyntheticTeacher::create(std::size_t patch_dim,
                                          std::size_t teacher_dim,
                                          std::uint64_t seed) {
  Rng rng(seed);
  return {Tensor::normal({patch_dim, teacher_dim},
                         1.0 / std::sqrt(static_cast<double>(patch_dim)), rng)};
}

Tensor SyntheticTeacher::features(const PatchGrid& grid) const {
  return matmul(grid.patches, map).detach();
}

VqkdFreeze VqkdFreeze::capture(const VqkdTerms& terms, bool stop_gradients) {
  VqkdFreeze freeze;
  for (const VqkdImageTrace& image : terms.images) {
    freeze.codes.push_back(image.codes);
    if (stop_gradients) {
      freeze.normalized_h.push_back(image.normalized_h.detach());
      freeze.selected.push_back(image.selected.detach());
    }
  }
  return freeze;
}

VqkdTerms vqkd_objective(const VqkdBatch& batch, const VqkdEncoder& encoder,
                         const Codebook& codebook, const VqkdDecoder& decoder,
                         std::size_t patch,
                         const VqkdFreeze* freeze, const ForwardContext& ctx) {
  if (batch.images.empty()) throw ContractError("vqkd_objective: empty batch");
  if (batch.teacher_features.size() != batch.images.size()) {
    throw ContractError("vqkd_objective: " + std::to_string(batch.images.size()) +
                        " images but " + std::to_string(batch.teacher_features.size()) +
                        " teacher feature sets");
  }
  const std::size_t n_images = batch.images.size();
  const bool frozen_sg = freeze && !freeze->normalized_h.empty();
  if (freeze && (freeze->codes.size() != n_images ||
                 (frozen_sg && (freeze->normalized_h.size() != n_images ||
                                freeze->selected.size() != n_images)))) {
    throw ContractError("vqkd_objective: frozen state does not match the batch size");
  }

  VqkdTerms terms;
  std::vector<Tensor> recon_parts, codebook_parts, commit_parts;
  for (std::size_t b = 0; b < batch.images.size(); ++b) {
    const PatchGrid grid = patchify(batch.images[b], patch);
    const Tensor& teacher = batch.teacher_features[b];
    if (teacher.rank() != 2 || teacher.dim(0) != grid.count()) {
      throw ContractError("vqkd_objective: image " + std::to_string(b) + " has " +
                          std::to_string(grid.count()) + " patches but teacher features " +
                          shape_string(teacher.shape()));
    }
    const Tensor h = encoder(grid, ctx);
    VqkdImageTrace trace;
    trace.codes = freeze ? freeze->codes[b] : quantize(h, codebook);
    if (trace.codes.codes.size() != grid.count()) {
      throw ContractError("vqkd_objective: code sequence length mismatch");
    }
    for (std::size_t code : trace.codes.codes) {
      if (code >= codebook.size()) {
        throw RangeError("vqkd_objective: code " + std::to_string(code) +
                         " outside codebook of size " + std::to_string(codebook.size()));
      }
    }

    trace.normalized_h = l2_normalize(h);
    trace.selected = l2_normalize(gather_rows(codebook.embeddings, trace.codes.codes));
    const Tensor& selected = trace.selected;
    Tensor sg_h, sg_selected;
    if (frozen_sg) {
      sg_h = freeze->normalized_h[b].detach();
      sg_selected = freeze->selected[b].detach();
      trace.decoder_input = add(trace.normalized_h, sub(sg_selected, sg_h));
    } else {
      sg_h = stop_gradient(trace.normalized_h);
      sg_selected = stop_gradient(selected);
      trace.decoder_input = straight_through(trace.normalized_h, selected);
    }
    trace.output = decoder(trace.decoder_input, ctx);
    if (trace.output.shape() != teacher.shape()) {
      throw DimensionError("vqkd_objective: decoder output " +
                           shape_string(trace.output.shape()) + " vs teacher " +
                           shape_string(teacher.shape()));
    }

    const Tensor cosines = sum_last(mul(l2_normalize(trace.output), l2_normalize(teacher)));
    recon_parts.push_back(scale(sum(cosines), -1.0));
    const Tensor cb_diff = sub(sg_h, selected);
    codebook_parts.push_back(sum(mul(cb_diff, cb_diff)));
    const Tensor commit_diff = sub(trace.normalized_h, sg_selected);
    commit_parts.push_back(sum(mul(commit_diff, commit_diff)));
    terms.images.push_back(std::move(trace));
  }

  auto total = [](const std::vector<Tensor>& parts) {
    Tensor acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return acc;
  };
  terms.reconstruction = total(recon_parts);
  terms.codebook = total(codebook_parts);
  terms.commitment = total(commit_parts);
  terms.loss = add(add(terms.reconstruction, terms.codebook), terms.commitment);
  return terms;
}

}  // namespace mwvqa::vision
