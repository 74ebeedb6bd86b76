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

#include <cmath>

#include <gtest/gtest.h>

#include "mwvqa/errors.hpp"
#include "mwvqa/layers.hpp"
#include "mwvqa/multiway.hpp"
#include "mwvqa/ops.hpp"
#include "mwvqa/rng.hpp"

namespace mwvqa::multiway {
namespace {

MultiwayConfig small_config() {
  MultiwayConfig cfg;
  cfg.layers = 3;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.d_ff = 16;
  cfg.fusion_top = 1;
  cfg.dropout = 0.0;
  cfg.visual_vocab = 7;
  cfg.text_vocab = 11;
  cfg.answers = 4;
  cfg.max_text_len = 6;
  cfg.image_h = cfg.image_w = 8;
  cfg.channels = 1;
  cfg.patch = 4;
  return cfg;
}

Tensor random_image(const MultiwayConfig& cfg, Rng& rng) {
  Tensor img(Shape{cfg.image_h, cfg.image_w, cfg.channels});
  for (double& v : img.mutable_data()) v = rng.uniform();
  return img;
}

// A random linear read-out of every hidden state, so gradients reach all
// layers even while the output heads are still zero.
Tensor probe_loss(const Tensor& hidden, Rng& rng) {
  return sum(mul(hidden, Tensor::normal(hidden.shape(), 1.0, rng)));
}

bool all_zero_grad(const FeedForwardParams& ffn) {
  NamedTensors named;
  ffn.collect("ffn", named);
  for (const auto& [name, t] : named) {
    for (double g : t.grad_values()) {
      if (g != 0.0) return false;
    }
  }
  return true;
}

TEST(MultiwayConfig, Validation) {
  MultiwayConfig cfg = small_config();
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.fusion_top = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.patch = 3;
  EXPECT_THROW(cfg.validate(), PatchSizeError);
  EXPECT_NO_THROW(small_config().validate());
}

TEST(MultiwayConfig, DefaultFusionTopClipsToDepth) {
  EXPECT_EQ(default_fusion_top(12), 3u);
  EXPECT_EQ(default_fusion_top(2), 2u);
  EXPECT_EQ(default_fusion_top(1), 1u);
}

TEST(MultiwayModel, FusionExpertsOnlyInTopLayers) {
  for (std::size_t f = 0; f <= 3; ++f) {
    MultiwayConfig cfg = small_config();
    cfg.fusion_top = f;
    Rng rng(0);
    const MultiwayModel m = MultiwayModel::create(cfg, rng);
    for (std::size_t l = 0; l < 3; ++l) {
      EXPECT_EQ(m.layers[l].fusion.has_value(), l + f >= 3) << "f=" << f << " layer " << l;
    }
  }
}

TEST(MultiwayModel, OutputHeadsStartAtZero) {
  Rng rng(1);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  for (const LinearParams* head : {&m.text_head, &m.visual_head, &m.answer_head}) {
    for (double v : head->weight.data()) EXPECT_EQ(v, 0.0);
    for (double v : head->bias.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Attention, SingleTokenIsValueThenOutputProjection) {
  Rng rng(2);
  const AttentionParams p = AttentionParams::create(4, 2, rng);
  const Tensor x = Tensor::normal({1, 4}, 1.0, rng);
  const Tensor out = attention(x, p);
  const Tensor expected = matmul(matmul(x, p.wv), p.wo);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.data()[i], expected.data()[i], 1e-14);
}

TEST(Attention, IdenticalTokensAttendUniformly) {
  Rng rng(3);
  const AttentionParams p = AttentionParams::create(4, 2, rng);
  const Tensor row = Tensor::normal({1, 4}, 1.0, rng);
  const Tensor x = concat_rows({row, row, row});
  const Tensor out = attention(x, p);
  const Tensor expected = matmul(matmul(row, p.wv), p.wo);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at(t, c), expected.at(0, c), 1e-14);
  }
}

TEST(Attention, PaddedKeyHasNoInfluence) {
  Rng rng(4);
  const AttentionParams p = AttentionParams::create(4, 2, rng);
  Tensor x = Tensor::normal({4, 4}, 1.0, rng, true);
  const std::vector<bool> valid = {true, true, false, true};
  const Tensor out = attention(x, p, valid);
  const std::vector<std::size_t> others = {0, 1, 3};
  sum(mul(gather_rows(out, others), Tensor::normal({3, 4}, 1.0, rng))).backward();
  const std::vector<double> g = x.grad_values();
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g[2 * 4 + c], 0.0);
}

TEST(Attention, IndivisibleWidthIsConfigError) {
  Rng rng(5);
  EXPECT_THROW(AttentionParams::create(6, 4, rng), ConfigError);
}

TEST(MultiwayBlock, TextOnlyLeavesVisionExpertsUntouched) {
  Rng rng(6);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const text::TokenSeq q{{5, 6, 7, 8}};
  const Encoded enc = encode(nullptr, &q, m);
  probe_loss(enc.hidden, rng).backward();
  for (std::size_t l = 0; l < 3; ++l) {
    if (m.config.is_fusion_layer(l)) continue;
    EXPECT_TRUE(all_zero_grad(m.layers[l].vision)) << "layer " << l;
    EXPECT_FALSE(all_zero_grad(m.layers[l].text)) << "layer " << l;
  }
}

TEST(MultiwayBlock, ImageOnlyTrainsVisionExperts) {
  Rng rng(7);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor img = random_image(m.config, rng);
  const Encoded enc = encode(&img, nullptr, m);
  probe_loss(enc.hidden, rng).backward();
  for (std::size_t l = 0; l < 3; ++l) {
    if (m.config.is_fusion_layer(l)) continue;
    // <cls> and <sep> are text-tagged, so the text side still moves here.
    EXPECT_FALSE(all_zero_grad(m.layers[l].vision)) << "layer " << l;
  }
}

TEST(MultiwayBlock, ImageOnlyBlockWithVisionTagsIsolatesTextExperts) {
  Rng rng(8);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor x = Tensor::normal({5, 8}, 1.0, rng);
  const std::vector<Modality> tags(5, Modality::Vision);
  for (std::size_t l = 0; l < 2; ++l) {
    probe_loss(multiway_block(x, tags, l, m), rng).backward();
    EXPECT_TRUE(all_zero_grad(m.layers[l].text)) << "layer " << l;
    EXPECT_FALSE(all_zero_grad(m.layers[l].vision)) << "layer " << l;
  }
}

TEST(MultiwayBlock, FusionLayerUsesOnlyTheFusionExpert) {
  Rng rng(9);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor x = Tensor::normal({5, 8}, 1.0, rng);
  const std::vector<Modality> tags = {Modality::Text, Modality::Text, Modality::Vision,
                                      Modality::Vision, Modality::Text};
  const std::size_t top = m.config.layers - 1;
  probe_loss(multiway_block(x, tags, top, m), rng).backward();
  EXPECT_TRUE(all_zero_grad(m.layers[top].vision));
  EXPECT_TRUE(all_zero_grad(m.layers[top].text));
  ASSERT_TRUE(m.layers[top].fusion.has_value());
  EXPECT_FALSE(all_zero_grad(*m.layers[top].fusion));
}

TEST(MultiwayBlock, Errors) {
  Rng rng(10);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor x = Tensor::normal({3, 8}, 1.0, rng);
  const std::vector<Modality> tags(3, Modality::Text);
  EXPECT_THROW(multiway_block(x, tags, 3, m), ContractError);
  EXPECT_THROW(multiway_block(x, std::vector<Modality>(2, Modality::Text), 0, m), DimensionError);
  const std::vector<Modality> bad = {Modality::Text, static_cast<Modality>(7), Modality::Text};
  EXPECT_THROW(multiway_block(x, bad, 0, m), ContractError);
}

TEST(Encode, TextOnlyLength) {
  Rng rng(11);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const text::TokenSeq q{{5, 6, 9}};
  const Encoded enc = encode(nullptr, &q, m);
  EXPECT_EQ(enc.hidden.shape(), (Shape{5, 8}));
  EXPECT_EQ(enc.text_len, 3u);
  EXPECT_EQ(enc.num_patches, 0u);
}

TEST(Encode, ImageAndTextLength) {
  Rng rng(12);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor img = random_image(m.config, rng);
  const text::TokenSeq q{{5, 6, 9}};
  const Encoded enc = encode(&img, &q, m);
  EXPECT_EQ(enc.hidden.dim(0), 9u);
  EXPECT_EQ(enc.patch_offset, 5u);
  EXPECT_EQ(enc.tags[0], Modality::Text);
  EXPECT_EQ(enc.tags[4], Modality::Text);
  EXPECT_EQ(enc.tags[5], Modality::Vision);
}

TEST(Encode, NothingIsContractError) {
  Rng rng(13);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  EXPECT_THROW(encode(nullptr, nullptr, m), ContractError);
}

TEST(Encode, OrderMatters) {
  Rng rng(14);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const text::TokenSeq a{{5, 6, 7}};
  const text::TokenSeq b{{6, 5, 7}};
  const Tensor ha = encode(nullptr, &a, m).hidden;
  const Tensor hb = encode(nullptr, &b, m).hidden;
  double diff = 0.0;
  for (std::size_t c = 0; c < 8; ++c) diff += std::abs(ha.at(0, c) - hb.at(0, c));
  EXPECT_GT(diff, 1e-9);
}

TEST(Encode, DeterministicWithoutDropout) {
  Rng rng(15);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor img = random_image(m.config, rng);
  const text::TokenSeq q{{5, 6}};
  const Tensor a = encode(&img, &q, m).hidden;
  const Tensor b = encode(&img, &q, m).hidden;
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Encode, TrainingDropoutIsReproducibleFromSeed) {
  MultiwayConfig cfg = small_config();
  cfg.dropout = 0.3;
  Rng init(16);
  const MultiwayModel m = MultiwayModel::create(cfg, init);
  const text::TokenSeq q{{5, 6, 7}};
  Rng r1(99), r2(99), r3(100);
  const Tensor a = encode(nullptr, &q, m, {true, 0.3, &r1}).hidden;
  const Tensor b = encode(nullptr, &q, m, {true, 0.3, &r2}).hidden;
  const Tensor c = encode(nullptr, &q, m, {true, 0.3, &r3}).hidden;
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

MdmExample visual_example(const MultiwayConfig& cfg, Rng& rng, std::vector<std::size_t> masked) {
  MdmExample ex;
  ex.image = random_image(cfg, rng);
  ex.patch_mask = masking::MaskSet{std::move(masked), cfg.num_patches()};
  for (std::size_t i = 0; i < cfg.num_patches(); ++i) {
    ex.visual_targets.codes.push_back(rng.uniform_index(cfg.visual_vocab));
  }
  return ex;
}

TEST(MdmLoss, ColdStartVisualIsLogK) {
  Rng rng(17);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  MdmBatch batch;
  batch.examples.push_back(visual_example(m.config, rng, {0, 2}));
  batch.examples.push_back(visual_example(m.config, rng, {1}));
  EXPECT_NEAR(mdm_loss(batch, m).item(), std::log(7.0), 1e-9);
}

TEST(MdmLoss, ColdStartTextIsLogVocab) {
  Rng rng(18);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  MdmBatch batch;
  MdmExample ex;
  ex.text = text::TokenSeq{{5, 6, 7, 8, 9}};
  ex.text_mask = masking::MaskSet{{1, 3}, 5};
  batch.examples.push_back(ex);
  EXPECT_NEAR(mdm_loss(batch, m).item(), std::log(11.0), 1e-9);
}

TEST(MdmLoss, ColdStartMixedIsWeightedMean) {
  Rng rng(19);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  MdmBatch batch;
  MdmExample ex = visual_example(m.config, rng, {3});
  ex.text = text::TokenSeq{{5, 6, 7}};
  ex.text_mask = masking::MaskSet{{0, 2}, 3};
  batch.examples.push_back(ex);
  EXPECT_NEAR(mdm_loss(batch, m).item(), (2 * std::log(11.0) + std::log(7.0)) / 3, 1e-9);
}

TEST(MdmLoss, ConfidentCorrectHeadGivesZero) {
  Rng rng(20);
  MultiwayModel m = MultiwayModel::create(small_config(), rng);
  m.visual_head.bias.mutable_data()[3] = 1000.0;
  MdmBatch batch;
  MdmExample ex = visual_example(m.config, rng, {0, 1, 2, 3});
  for (auto& z : ex.visual_targets.codes) z = 3;
  batch.examples.push_back(ex);
  EXPECT_EQ(mdm_loss(batch, m).item(), 0.0);
}

TEST(MdmLoss, UnmaskedTargetsAreIgnored) {
  Rng rng(21);
  Rng init(22);
  MultiwayModel m = MultiwayModel::create(small_config(), init);
  for (double& v : m.visual_head.weight.mutable_data()) v = 0.1 * rng.normal();
  MdmBatch batch;
  batch.examples.push_back(visual_example(m.config, rng, {1, 2}));
  const double before = mdm_loss(batch, m).item();
  batch.examples[0].visual_targets.codes[0] = (batch.examples[0].visual_targets.codes[0] + 1) % 7;
  batch.examples[0].visual_targets.codes[3] = (batch.examples[0].visual_targets.codes[3] + 2) % 7;
  EXPECT_EQ(mdm_loss(batch, m).item(), before);
}

TEST(MdmLoss, NonNegativeOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    MultiwayModel m = MultiwayModel::create(small_config(), rng);
    for (double& v : m.visual_head.weight.mutable_data()) v = rng.normal();
    MdmBatch batch;
    batch.examples.push_back(visual_example(m.config, rng, {0, 3}));
    EXPECT_GE(mdm_loss(batch, m).item(), 0.0);
  }
}

TEST(MdmLoss, NoMaskedPositionsIsContractError) {
  Rng rng(23);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  MdmBatch batch;
  batch.examples.push_back(visual_example(m.config, rng, {}));
  EXPECT_THROW(mdm_loss(batch, m), ContractError);
}

TEST(AnswerSelect, SingleOptionHasProbabilityOne) {
  const std::vector<double> logits = {0.3, -2.0, 5.0};
  const std::vector<std::size_t> options = {1};
  const AnswerChoice c = select_from_logits(logits, options);
  EXPECT_EQ(c.answer, 1u);
  EXPECT_EQ(c.probabilities, std::vector<double>{1.0});
}

TEST(AnswerSelect, TiesGoToFirstOption) {
  const std::vector<double> logits = {1.0, 2.0, 2.0, 2.0};
  const std::vector<std::size_t> options = {3, 1, 2};
  EXPECT_EQ(select_from_logits(logits, options).answer, 3u);
}

TEST(AnswerSelect, MatchesRawLogitArgmaxAndIgnoresOutsideOptions) {
  const std::vector<double> logits = {9.0, 0.5, 1.5, -1.0};
  const std::vector<std::size_t> options = {1, 2, 3};
  const AnswerChoice c = select_from_logits(logits, options);
  EXPECT_EQ(c.answer, 2u);
  EXPECT_EQ(c.option_index, 1u);
  double s = 0.0;
  for (double p : c.probabilities) s += p;
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(AnswerSelect, InvariantToPositiveRescaling) {
  Rng rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(6);
    for (double& v : logits) v = rng.normal();
    const std::vector<std::size_t> options = {0, 2, 3, 5};
    const double k = 0.01 + 10.0 * rng.uniform();
    std::vector<double> scaled = logits;
    for (double& v : scaled) v *= k;
    EXPECT_EQ(select_from_logits(logits, options).answer,
              select_from_logits(scaled, options).answer);
  }
}

TEST(AnswerSelect, Errors) {
  Rng rng(25);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const text::TokenSeq q{{5}};
  EXPECT_THROW(answer_select(nullptr, q, std::vector<std::size_t>{}, m), ContractError);
  EXPECT_THROW(answer_select(nullptr, q, std::vector<std::size_t>{0, 4}, m), RangeError);
}

TEST(AnswerSelect, ColdStartIsUniformOverOptions) {
  Rng rng(26);
  const MultiwayModel m = MultiwayModel::create(small_config(), rng);
  const Tensor img = random_image(m.config, rng);
  const text::TokenSeq q{{5, 7}};
  const std::vector<std::size_t> options = {1, 2, 3};
  const AnswerChoice c = answer_select(&img, q, options, m);
  EXPECT_EQ(c.answer, 1u);
  for (double p : c.probabilities) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
}

TEST(AnswerLoss, ColdStartIsLogOptionCount) {
  const Tensor logits(Shape{1, 4});
  const std::vector<std::size_t> options = {0, 2, 3};
  EXPECT_NEAR(answer_loss(logits, options, 1).item(), std::log(3.0), 1e-15);
  EXPECT_THROW(answer_loss(logits, options, 3), RangeError);
}

}  // namespace
}  // namespace mwvqa::multiway
