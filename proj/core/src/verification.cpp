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

#include "mwvqa/verification.hpp"

#include <algorithm>
#include <cmath>

#include "mwvqa/layers.hpp"
#include "mwvqa/multiway.hpp"
#include "mwvqa/ops.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/vision_tokenizer.hpp"

namespace mwvqa::verification {
namespace {

Tensor rand_t(Shape shape, Rng& rng, double stddev = 1.0) {
  return Tensor::normal(std::move(shape), stddev, rng, true);
}

// Random linear functional of `out`, so every output element matters.
Tensor probe(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

// Replaces every parameter with fresh noise so that zero-initialized heads
// and unit gains do not hide gradient paths.
void scramble(const NamedTensors& params, Rng& rng, double stddev) {
  for (const auto& [name, t] : params) {
    Tensor p = t;
    const double base = name.ends_with(".gamma") ? 1.0 : 0.0;
    for (double& v : p.mutable_data()) v = base + stddev * rng.normal();
  }
}

using Check = std::function<GradReport(Rng&, double, double)>;

// Unary op on one random input, probed by a random functional.
Check unary(Shape shape, std::function<Tensor(const Tensor&)> op) {
  return [shape, op](Rng& rng, double h, double tol) {
    Tensor x = rand_t(shape, rng);
    const Tensor w = rand_t(op(x).shape(), rng).detach();
    return grad_check([&] { return probe(op(x), w); }, {x}, h, tol);
  };
}

Check binary(Shape sa, Shape sb, std::function<Tensor(const Tensor&, const Tensor&)> op) {
  return [sa, sb, op](Rng& rng, double h, double tol) {
    Tensor a = rand_t(sa, rng);
    Tensor b = rand_t(sb, rng);
    const Tensor w = rand_t(op(a, b).shape(), rng).detach();
    return grad_check([&] { return probe(op(a, b), w); }, {a, b}, h, tol);
  };
}

GradReport check_layer_norm(Rng& rng, double h, double tol) {
  Tensor x = rand_t({4, 6}, rng);
  Tensor gamma = rand_t({6}, rng);
  Tensor beta = rand_t({6}, rng);
  const Tensor w = rand_t({4, 6}, rng).detach();
  return grad_check([&] { return probe(layer_norm(x, gamma, beta, kLayerNormEps), w); },
                    {x, gamma, beta}, h, tol);
}

GradReport check_cross_entropy(Rng& rng, double h, double tol) {
  Tensor logits = rand_t({4, 5}, rng);
  std::vector<std::size_t> targets;
  for (int i = 0; i < 4; ++i) targets.push_back(rng.uniform_index(5));
  return grad_check([&] { return cross_entropy(logits, targets); }, {logits}, h, tol);
}

GradReport check_dropout(Rng& rng, double h, double tol) {
  Tensor x = rand_t({4, 5}, rng);
  const Tensor w = rand_t({4, 5}, rng).detach();
  const std::uint64_t mask_seed = rng.next_u64();
  return grad_check(
      [&] {
        Rng mask_rng(mask_seed);
        return probe(dropout(x, 0.3, mask_rng), w);
      },
      {x}, h, tol);
}

GradReport check_attention(Rng& rng, double h, double tol) {
  const std::size_t d = 8;
  AttentionParams params;
  params.heads = 2;
  params.wq = rand_t({d, d}, rng, 0.5);
  params.wk = rand_t({d, d}, rng, 0.5);
  params.wv = rand_t({d, d}, rng, 0.5);
  params.wo = rand_t({d, d}, rng, 0.5);
  Tensor x = rand_t({5, d}, rng);
  const std::vector<bool> valid = {true, true, false, true, true};
  const Tensor w = rand_t({5, d}, rng).detach();
  return grad_check([&] { return probe(attention(x, params, valid), w); },
                    {x, params.wq, params.wk, params.wv, params.wo}, h, tol);
}

GradReport check_transformer_layer(Rng& rng, double h, double tol) {
  TransformerLayerParams layer = TransformerLayerParams::create(8, 2, 12, rng);
  NamedTensors named;
  layer.collect("layer", named);
  scramble(named, rng, 0.3);
  Tensor x = rand_t({5, 8}, rng);
  const Tensor w = rand_t({5, 8}, rng).detach();
  std::vector<Tensor> params = tensors_of(named);
  params.push_back(x);
  return grad_check([&] { return probe(layer(x, {}), w); }, params, h, tol);
}

GradReport check_embed_patches(Rng& rng, double h, double tol) {
  Tensor image(Shape{4, 4, 3});
  for (double& v : image.mutable_data()) v = rng.uniform();
  const vision::PatchGrid grid = vision::patchify(image, 2);
  Tensor proj = rand_t({12, 6}, rng);
  Tensor pos = rand_t({4, 6}, rng);
  const Tensor w = rand_t({4, 6}, rng).detach();
  return grad_check([&] { return probe(vision::embed_patches(grid, proj, pos), w); },
                    {proj, pos}, h, tol);
}

// The VQ-KD objective with code assignments and stop-gradient operands
// frozen at the current point; its true gradient must equal the
// straight-through gradient of the live objective.
GradReport check_vqkd(Rng& rng, double h, double tol) {
  vision::VqkdConfig cfg;
  cfg.image_h = cfg.image_w = 4;
  cfg.channels = 3;
  cfg.patch = 2;
  cfg.encoder_dim = 4;
  cfg.encoder_layers = 1;
  cfg.encoder_heads = 2;
  cfg.codebook_size = 8;
  cfg.code_dim = 5;
  cfg.decoder_layers = 1;
  cfg.decoder_heads = 1;
  cfg.teacher_dim = 5;
  vision::VqkdTokenizer tok = vision::VqkdTokenizer::create(cfg, rng);
  const NamedTensors named = tok.parameters();
  scramble(named, rng, 0.3);
  vision::VqkdBatch batch;
  for (int i = 0; i < 2; ++i) {
    Tensor image(Shape{4, 4, 3});
    for (double& v : image.mutable_data()) v = rng.uniform();
    batch.images.push_back(image);
    batch.teacher_features.push_back(Tensor::normal({4, 5}, 1.0, rng));
  }
  // Codes sit near the encoder outputs, one per patch, so the two distance
  // terms stay small. Finite differences resolve a gradient only to about
  // ulp(loss) / h, and a loss dominated by those terms would swamp small
  // encoder gradients.
  {
    Tensor rows = tok.codebook.embeddings;
    auto out = rows.mutable_data();
    std::size_t at = 0;
    for (const Tensor& image : batch.images) {
      const Tensor hv = l2_normalize(tok.encoder(vision::patchify(image, cfg.patch)));
      for (double v : hv.data()) out[at++] = v + 0.1 * rng.normal();
    }
  }
  const std::vector<Tensor> params = tensors_of(named);
  for (Tensor p : params) p.zero_grad();
  const vision::VqkdTerms live = vision::vqkd_objective(batch, tok.encoder, tok.codebook,
                                                        tok.decoder, cfg.patch);
  live.loss.backward();
  std::vector<std::vector<double>> live_grads;
  for (const Tensor& p : params) live_grads.push_back(p.grad_values());

  const vision::VqkdFreeze freeze = vision::VqkdFreeze::capture(live, true);
  GradReport report = grad_check(
      [&] {
        return vision::vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch,
                                      &freeze)
            .loss;
      },
      params, h, tol);
  // grad_check leaves the frozen objective's analytic gradient in place.
  double mismatch = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double> frozen = params[i].grad_values();
    for (std::size_t k = 0; k < frozen.size(); ++k) {
      const double denom = std::max({std::abs(frozen[k]), std::abs(live_grads[i][k]), 1e-8});
      mismatch = std::max(mismatch, std::abs(frozen[k] - live_grads[i][k]) / denom);
    }
  }
  report.worst = std::max(report.worst, mismatch);
  report.pass = report.worst <= tol;
  return report;
}

multiway::MultiwayConfig tiny_multiway() {
  multiway::MultiwayConfig cfg;
  cfg.layers = 2;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.d_ff = 16;
  cfg.fusion_top = 1;
  cfg.dropout = 0.0;
  cfg.visual_vocab = 6;
  cfg.text_vocab = 12;
  cfg.answers = 3;
  cfg.max_text_len = 6;
  cfg.image_h = cfg.image_w = 4;
  cfg.channels = 3;
  cfg.patch = 2;
  return cfg;
}

GradReport check_multiway_block(Rng& rng, double h, double tol) {
  const multiway::MultiwayModel model = multiway::MultiwayModel::create(tiny_multiway(), rng);
  NamedTensors named;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const multiway::MultiwayLayer& layer = model.layers[l];
    const std::string p = "layer" + std::to_string(l);
    layer.attn_norm.collect(p + ".attn_norm", named);
    layer.attn.collect(p + ".attn", named);
    layer.vision.collect(p + ".vision", named);
    layer.text.collect(p + ".text", named);
    if (layer.fusion) layer.fusion->collect(p + ".fusion", named);
  }
  scramble(named, rng, 0.3);
  Tensor tokens = rand_t({5, 8}, rng);
  using multiway::Modality;
  const std::vector<Modality> tags = {Modality::Text, Modality::Text, Modality::Text,
                                      Modality::Vision, Modality::Vision};
  const Tensor w = rand_t({5, 8}, rng).detach();
  std::vector<Tensor> params = tensors_of(named);
  params.push_back(tokens);
  return grad_check(
      [&] {
        const Tensor mid = multiway::multiway_block(tokens, tags, 0, model);
        return probe(multiway::multiway_block(mid, tags, 1, model), w);
      },
      params, h, tol);
}

GradReport check_multiway_model(Rng& rng, double h, double tol) {
  const multiway::MultiwayConfig cfg = tiny_multiway();
  const multiway::MultiwayModel model = multiway::MultiwayModel::create(cfg, rng);
  const NamedTensors named = model.parameters();
  scramble(named, rng, 0.3);

  Tensor image(Shape{4, 4, 3});
  for (double& v : image.mutable_data()) v = rng.uniform();
  auto random_text = [&](std::size_t len) {
    text::TokenSeq seq;
    for (std::size_t i = 0; i < len; ++i) {
      seq.ids.push_back(text::kNumReserved + rng.uniform_index(cfg.text_vocab - text::kNumReserved));
    }
    return seq;
  };
  vision::VisualTokenSeq codes;
  for (int i = 0; i < 4; ++i) codes.codes.push_back(rng.uniform_index(cfg.visual_vocab));

  multiway::MdmBatch batch;
  multiway::MdmExample paired;
  paired.image = image;
  paired.text = random_text(3);
  paired.text_mask = {{1}, 3};
  paired.patch_mask = {{0, 3}, 4};
  paired.visual_targets = codes;
  batch.examples.push_back(paired);
  multiway::MdmExample text_only;
  text_only.text = random_text(4);
  text_only.text_mask = {{0, 2}, 4};
  batch.examples.push_back(text_only);
  multiway::MdmExample image_only;
  image_only.image = image;
  image_only.patch_mask = {{1}, 4};
  image_only.visual_targets = codes;
  batch.examples.push_back(image_only);

  const text::TokenSeq question = random_text(2);
  const std::vector<std::size_t> options = {0, 2};
  return grad_check(
      [&] {
        const Tensor logits = multiway::answer_logits(&image, question, model);
        return add(multiway::mdm_loss(batch, model), multiway::answer_loss(logits, options, 1));
      },
      tensors_of(named), h, tol);
}

std::vector<GradientCase> build_cases() {
  std::vector<std::pair<std::string, Check>> checks = {
      {"matmul", binary({3, 4}, {4, 5}, [](auto& a, auto& b) { return matmul(a, b); })},
      {"transpose", unary({3, 5}, [](auto& x) { return transpose(x); })},
      {"add", binary({3, 4}, {3, 4}, [](auto& a, auto& b) { return add(a, b); })},
      {"sub", binary({3, 4}, {3, 4}, [](auto& a, auto& b) { return sub(a, b); })},
      {"mul", binary({3, 4}, {3, 4}, [](auto& a, auto& b) { return mul(a, b); })},
      {"scale", unary({3, 4}, [](auto& x) { return scale(x, -1.7); })},
      {"add_rowwise", binary({3, 4}, {4}, [](auto& a, auto& b) { return add_rowwise(a, b); })},
      {"gelu", unary({3, 4}, [](auto& x) { return gelu(x); })},
      {"softmax_rows", unary({3, 5}, [](auto& x) { return softmax(x, 1); })},
      {"softmax_cols", unary({3, 5}, [](auto& x) { return softmax(x, 0); })},
      {"softmax_rank3", unary({2, 3, 4}, [](auto& x) { return softmax(x, 1); })},
      {"masked_softmax",
       unary({3, 5},
             [](auto& x) { return masked_softmax(x, {true, false, true, true, false}); })},
      {"layer_norm", check_layer_norm},
      {"l2_normalize", unary({3, 4}, [](auto& x) { return l2_normalize(x); })},
      {"sum", unary({3, 4}, [](auto& x) { return sum(x); })},
      {"mean", unary({3, 4}, [](auto& x) { return mean(x); })},
      {"sum_last", unary({3, 4}, [](auto& x) { return sum_last(x); })},
      {"gather_rows",
       unary({5, 3},
             [](auto& x) {
               const std::vector<std::size_t> ids = {4, 1, 1, 0};
               return gather_rows(x, ids);
             })},
      {"scatter_rows",
       unary({3, 4},
             [](auto& x) {
               const std::vector<std::size_t> ids = {2, 0, 3};
               return scatter_rows(x, ids, 5);
             })},
      {"gather_cols",
       unary({3, 5},
             [](auto& x) {
               const std::vector<std::size_t> cols = {4, 1, 1};
               return gather_cols(x, cols);
             })},
      {"slice_cols", unary({3, 6}, [](auto& x) { return slice_cols(x, 1, 4); })},
      {"concat_cols",
       binary({3, 2}, {3, 3}, [](auto& a, auto& b) { return concat_cols({a, b}); })},
      {"concat_rows",
       binary({2, 3}, {1, 3}, [](auto& a, auto& b) { return concat_rows({a, b}); })},
      {"cross_entropy", check_cross_entropy},
      {"dropout", check_dropout},
      {"attention", check_attention},
      {"transformer_layer", check_transformer_layer},
      {"embed_patches", check_embed_patches},
      {"vqkd_objective", check_vqkd},
      {"multiway_block", check_multiway_block},
      {"multiway_model", check_multiway_model},
  };
  std::vector<GradientCase> cases;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Check check = checks[i].second;
    const std::uint64_t salt = i + 1;
    cases.push_back({checks[i].first, [check, salt](std::uint64_t seed, double h, double tol) {
                       Rng rng(seed * 0x9E3779B97F4A7C15ull + salt);
                       return check(rng, h, tol);
                     }});
  }
  return cases;
}

}  // namespace

const std::vector<GradientCase>& gradient_cases() {
  static const std::vector<GradientCase> cases = build_cases();
  return cases;
}

std::vector<CaseResult> run_gradient_suite(
    const SuiteOptions& options, const std::function<void(const CaseResult&)>& on_result) {
  std::vector<CaseResult> results;
  for (const GradientCase& c : gradient_cases()) {
    for (std::size_t s = 0; s < options.seeds; ++s) {
      CaseResult r;
      r.name = c.name;
      r.seed = options.first_seed + s;
      r.report = c.run(r.seed, options.h, options.tol);
      if (on_result) on_result(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace mwvqa::verification
