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

#include <algorithm>
#include <bit>
#include <cmath>

#include <gtest/gtest.h>

#include "mwvqa/errors.hpp"
#include "mwvqa/grad_check.hpp"
#include "mwvqa/ops.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/vision_tokenizer.hpp"
#include "oracles.hpp"

namespace mwvqa::vision {
namespace {

Tensor random_image(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  Tensor img(Shape{h, w, c});
  for (double& v : img.mutable_data()) v = rng.uniform();
  return img;
}

VqkdConfig tiny_config() {
  VqkdConfig cfg;
  cfg.image_h = cfg.image_w = 8;
  cfg.channels = 1;
  cfg.patch = 4;
  cfg.encoder_dim = 8;
  cfg.encoder_layers = 1;
  cfg.encoder_heads = 2;
  cfg.codebook_size = 3;
  cfg.code_dim = 5;
  cfg.decoder_layers = 1;
  cfg.decoder_heads = 1;
  cfg.teacher_dim = 5;
  return cfg;
}

VqkdBatch random_batch(const VqkdConfig& cfg, std::size_t n, Rng& rng) {
  VqkdBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    batch.images.push_back(random_image(cfg.image_h, cfg.image_w, cfg.channels, rng));
    batch.teacher_features.push_back(Tensor::normal({cfg.num_patches(), cfg.teacher_dim}, 1.0, rng));
  }
  return batch;
}

TEST(Patchify, FullSizeImage) {
  const PatchGrid g = patchify(Tensor(Shape{224, 224, 3}), 16);
  EXPECT_EQ(g.count(), 196u);
  EXPECT_EQ(g.patches.shape(), (Shape{196, 768}));
}

TEST(Patchify, SmallImage) {
  const PatchGrid g = patchify(Tensor(Shape{8, 8, 1}), 4);
  EXPECT_EQ(g.patches.shape(), (Shape{4, 16}));
}

TEST(Patchify, IndivisibleSizeNamesDimensions) {
  try {
    patchify(Tensor(Shape{10, 10, 1}), 4);
    FAIL() << "expected PatchSizeError";
  } catch (const PatchSizeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("10"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4"), std::string::npos) << msg;
  }
}

TEST(Patchify, RowMajorBlockLayout) {
  Rng rng(1);
  const Tensor img = random_image(6, 4, 2, rng);
  const PatchGrid g = patchify(img, 2);
  ASSERT_EQ(g.grid_h, 3u);
  ASSERT_EQ(g.grid_w, 2u);
  for (std::size_t by = 0; by < 3; ++by) {
    for (std::size_t bx = 0; bx < 2; ++bx) {
      std::size_t col = 0;
      for (std::size_t y = 0; y < 2; ++y) {
        for (std::size_t x = 0; x < 2; ++x) {
          for (std::size_t c = 0; c < 2; ++c) {
            const double pixel = img.data()[((by * 2 + y) * 4 + bx * 2 + x) * 2 + c];
            EXPECT_EQ(g.patches.at(by * 2 + bx, col++), pixel);
          }
        }
      }
    }
  }
}

TEST(Patchify, UnpatchifyRestoresImage) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensor img = random_image(12, 8, 3, rng);
    const Tensor back = unpatchify(patchify(img, 4));
    ASSERT_EQ(back.shape(), img.shape());
    EXPECT_TRUE(std::equal(back.data().begin(), back.data().end(), img.data().begin()));
  }
}

TEST(EmbedPatches, ZeroWeightsGiveZeros) {
  Rng rng(2);
  const PatchGrid g = patchify(random_image(8, 8, 1, rng), 4);
  const Tensor out = embed_patches(g, Tensor(Shape{16, 3}), Tensor(Shape{4, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(EmbedPatches, IdentityProjectionCopiesPatch) {
  Rng rng(3);
  const PatchGrid g = patchify(random_image(2, 2, 1, rng), 2);
  Tensor w(Shape{4, 6});
  for (std::size_t i = 0; i < 4; ++i) w.mutable_data()[i * 6 + i] = 1.0;
  const Tensor out = embed_patches(g, w, Tensor(Shape{1, 6}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.at(0, i), g.patches.at(0, i));
  EXPECT_EQ(out.at(0, 4), 0.0);
  EXPECT_EQ(out.at(0, 5), 0.0);
}

TEST(EmbedPatches, MatchesRowByRowDotProducts) {
  Rng rng(4);
  const PatchGrid g = patchify(random_image(8, 8, 1, rng), 4);
  const Tensor w = Tensor::normal({16, 3}, 1.0, rng);
  const Tensor pos = Tensor::normal({4, 3}, 1.0, rng);
  const Tensor out = embed_patches(g, w, pos);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = pos.at(i, j);
      for (std::size_t k = 0; k < 16; ++k) acc += g.patches.at(i, k) * w.at(k, j);
      EXPECT_NEAR(out.at(i, j), acc, 1e-12);
    }
  }
}

TEST(EmbedPatches, ShapeMismatchIsDimensionError) {
  const PatchGrid g = patchify(Tensor(Shape{8, 8, 1}), 4);
  EXPECT_THROW(embed_patches(g, Tensor(Shape{15, 3}), Tensor(Shape{4, 3})), DimensionError);
  EXPECT_THROW(embed_patches(g, Tensor(Shape{16, 3}), Tensor(Shape{5, 3})), DimensionError);
}

TEST(Quantize, ExactMatchPicksThatCode) {
  Rng rng(5);
  const Codebook cb = Codebook::uniform_sphere(4, 3, rng);
  Tensor h(Shape{1, 3}, std::vector<double>(cb.embeddings.data().begin() + 6,
                                            cb.embeddings.data().begin() + 9));
  EXPECT_EQ(quantize(h, cb).codes, std::vector<std::size_t>{2});
}

TEST(Quantize, TiesGoToLowestIndex) {
  const Codebook cb = Codebook::from(Tensor(
      Shape{3, 2}, std::vector<double>{0.0, 1.0, 1.0, 0.0, 1.0, 0.0}));
  const Tensor h(Shape{1, 2}, std::vector<double>{2.0, 0.1});
  EXPECT_EQ(quantize(h, cb).codes, std::vector<std::size_t>{1});
}

TEST(Quantize, AgreesWithCosineArgmaxOnFiftyVectors) {
  Rng rng(6);
  const Codebook cb = Codebook::uniform_sphere(8, 6, rng);
  const Tensor h = Tensor::normal({50, 6}, 1.0, rng);
  const VisualTokenSeq z = quantize(h, cb);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(z.codes[i], oracle::cosine_argmax(h.data().subspan(i * 6, 6), cb.embeddings.data(), 8, 6));
  }
}

TEST(Quantize, AgreesWithCosineArgmaxOnThousandDraws) {
  for (std::size_t k : {2u, 8u, 64u}) {
    Rng rng(100 + k);
    std::size_t agree = 0;
    for (int draw = 0; draw < 1000; ++draw) {
      // Unnormalized codebook rows so normalization matters.
      const Codebook cb = Codebook::from(Tensor::normal({k, 4}, 1.0 + draw % 3, rng));
      const Tensor h = Tensor::normal({1, 4}, 2.0, rng);
      if (quantize(h, cb).codes[0] == oracle::cosine_argmax(h.data(), cb.embeddings.data(), k, 4)) ++agree;
    }
    EXPECT_EQ(agree, 1000u) << "K=" << k;
  }
}

TEST(Codebook, UniformSphereRowsAreUnit) {
  Rng rng(7);
  const Codebook cb = Codebook::uniform_sphere(16, 5, rng);
  for (std::size_t j = 0; j < 16; ++j) {
    double n = 0.0;
    for (std::size_t c = 0; c < 5; ++c) n += cb.embeddings.at(j, c) * cb.embeddings.at(j, c);
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(DecodeTokens, IdentityDecoderPassesNormalizedCodes) {
  VqkdConfig cfg = tiny_config();
  cfg.decoder_layers = 0;
  Rng rng(8);
  const Codebook cb = Codebook::from(Tensor::normal({3, 5}, 2.0, rng));
  const VqkdDecoder dec = VqkdDecoder::create(cfg, rng);
  ASSERT_TRUE(dec.identity());
  const VisualTokenSeq z{{2, 0, 2, 1}};
  const Tensor out = decode_tokens(z, cb, dec);
  const Tensor expected = l2_normalize(gather_rows(cb.embeddings, z.codes));
  EXPECT_TRUE(std::equal(out.data().begin(), out.data().end(), expected.data().begin()));
}

TEST(DecodeTokens, EqualCodesWithoutPositionsGiveEqualOutputs) {
  VqkdConfig cfg = tiny_config();
  cfg.decoder_positions = false;
  Rng rng(9);
  const Codebook cb = Codebook::uniform_sphere(3, 5, rng);
  const VqkdDecoder dec = VqkdDecoder::create(cfg, rng);
  const Tensor out = decode_tokens(VisualTokenSeq{{1, 1, 1, 1}}, cb, dec);
  for (std::size_t i = 1; i < 4; ++i) {
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out.at(i, c), out.at(0, c));
  }
}

TEST(DecodeTokens, InvalidCodeIsRangeError) {
  Rng rng(10);
  const Codebook cb = Codebook::uniform_sphere(3, 5, rng);
  const VqkdDecoder dec = VqkdDecoder::create(tiny_config(), rng);
  EXPECT_THROW(decode_tokens(VisualTokenSeq{{0, 3, 1, 1}}, cb, dec), RangeError);
}

// Recorded from the first verified build: one decoder layer, seed 0.
TEST(DecodeTokens, OneLayerGoldenAtSeedZero) {
  Rng rng(0);
  const VqkdConfig cfg = tiny_config();
  const Codebook cb = Codebook::uniform_sphere(3, 5, rng);
  VqkdDecoder dec = VqkdDecoder::create(cfg, rng);
  // Widen the small default head so outputs are well away from zero.
  for (double& v : dec.head.weight.mutable_data()) v *= 50.0;
  const Tensor out = decode_tokens(VisualTokenSeq{{0, 1, 2, 1}}, cb, dec);
  const std::vector<double> golden = {
      -0.20073365839763258, -4.5888824922633509,
      -1.533566905830156, -2.2843295232478007,
      1.3407244741976132, -2.5095096254292777,
      -3.9810962400759315, -4.3921420186299684,
      0.7231905173069253, 2.2612477290603099,
      4.7893233276258194, -0.53109853290866749,
      3.7513858014762698, -4.4400269724998251,
      -2.1197244683157574, -3.0109651243718814,
      -3.7429058433186517, -4.4916302460890822,
      1.0434256595392155, 1.9971681404104951};
  ASSERT_EQ(out.numel(), golden.size());
  for (std::size_t i = 0; i < golden.size(); ++i) {
    EXPECT_NEAR(out.data()[i], golden[i], 1e-12) << "index " << i;
  }
}

TEST(VqkdObjective, OptimumGivesMinusPatchCount) {
  VqkdConfig cfg = tiny_config();
  cfg.decoder_layers = 0;
  cfg.code_dim = cfg.teacher_dim = 5;
  cfg.codebook_size = 4;
  Rng rng(11);
  VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  VqkdBatch batch;
  batch.images.push_back(random_image(8, 8, 1, rng));
  const Tensor h = tok.encoder(patchify(batch.images[0], cfg.patch));
  // Codebook = encoder outputs, teacher = their normalized directions.
  tok.codebook = Codebook::from(h.detach());
  batch.teacher_features.push_back(scale(l2_normalize(h), 3.0).detach());
  const VqkdTerms t = vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch);
  EXPECT_NEAR(t.loss.item(), -4.0, 1e-12);
  EXPECT_NEAR(t.codebook.item(), 0.0, 1e-24);
  EXPECT_NEAR(t.commitment.item(), 0.0, 1e-24);
}

TEST(VqkdObjective, TeacherCountMismatchIsContractError) {
  const VqkdConfig cfg = tiny_config();
  Rng rng(12);
  const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  VqkdBatch batch = random_batch(cfg, 1, rng);
  batch.teacher_features[0] = Tensor(Shape{3, cfg.teacher_dim});
  EXPECT_THROW(vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch),
               ContractError);
  batch.teacher_features.clear();
  EXPECT_THROW(vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch),
               ContractError);
}

TEST(VqkdObjective, TermsAddUp) {
  const VqkdConfig cfg = tiny_config();
  Rng rng(13);
  const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  const VqkdTerms t = vqkd_objective(random_batch(cfg, 2, rng), tok.encoder, tok.codebook,
                                     tok.decoder, cfg.patch);
  EXPECT_NEAR(t.loss.item(), t.reconstruction.item() + t.codebook.item() + t.commitment.item(),
              1e-12);
  // Both penalties measure the same distance.
  EXPECT_NEAR(t.codebook.item(), t.commitment.item(), 1e-12);
}

TEST(VqkdObjective, StraightThroughGradientIsBitwiseEqual) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const VqkdConfig cfg = tiny_config();
    Rng rng(seed);
    const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
    const VqkdTerms t = vqkd_objective(random_batch(cfg, 3, rng), tok.encoder, tok.codebook,
                                       tok.decoder, cfg.patch);
    // Only the reconstruction term reaches l2(h) through the pass-through.
    t.reconstruction.backward();
    for (const VqkdImageTrace& img : t.images) {
      const std::vector<double> at_encoder = img.normalized_h.grad_values();
      const std::vector<double> at_decoder = img.decoder_input.grad_values();
      ASSERT_EQ(at_encoder.size(), at_decoder.size());
      bool any_nonzero = false;
      for (std::size_t i = 0; i < at_encoder.size(); ++i) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(at_encoder[i]),
                  std::bit_cast<std::uint64_t>(at_decoder[i]));
        any_nonzero = any_nonzero || at_decoder[i] != 0.0;
      }
      EXPECT_TRUE(any_nonzero);
    }
  }
}

TEST(VqkdObjective, UnselectedCodesGetZeroGradient) {
  VqkdConfig cfg = tiny_config();
  cfg.codebook_size = 32;
  Rng rng(14);
  const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  const VqkdTerms t = vqkd_objective(random_batch(cfg, 1, rng), tok.encoder, tok.codebook,
                                     tok.decoder, cfg.patch);
  t.loss.backward();
  std::vector<bool> used(cfg.codebook_size, false);
  for (const VqkdImageTrace& img : t.images) {
    for (std::size_t z : img.codes.codes) used[z] = true;
  }
  const std::vector<double> g = tok.codebook.embeddings.grad_values();
  std::size_t unused = 0;
  for (std::size_t j = 0; j < cfg.codebook_size; ++j) {
    if (used[j]) continue;
    ++unused;
    for (std::size_t c = 0; c < cfg.code_dim; ++c) EXPECT_EQ(g[j * cfg.code_dim + c], 0.0);
  }
  EXPECT_GT(unused, 0u);
}

TEST(VqkdObjective, CodebookOnlyLearnsFromItsOwnTerm) {
  const VqkdConfig cfg = tiny_config();
  Rng rng(15);
  const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  const VqkdBatch batch = random_batch(cfg, 2, rng);
  const VqkdTerms t = vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch);
  add(t.reconstruction, t.commitment).backward();
  for (double g : tok.codebook.embeddings.grad_values()) EXPECT_EQ(g, 0.0);
}

TEST(VqkdObjective, FrozenCodesMatchFiniteDifferences) {
  const VqkdConfig cfg = tiny_config();
  Rng rng(0);
  const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
  const VqkdBatch batch = random_batch(cfg, 1, rng);
  const NamedTensors named = tok.parameters();
  std::vector<Tensor> params;
  for (const auto& [name, p] : named) params.push_back(p);

  const VqkdTerms live = vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch);
  live.loss.backward();
  std::vector<std::vector<double>> live_grads;
  for (const Tensor& p : params) live_grads.push_back(p.grad_values());

  const VqkdFreeze freeze = VqkdFreeze::capture(live, true);
  const GradReport r = grad_check(
      [&] {
        return vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch, &freeze)
            .loss;
      },
      params);
  EXPECT_TRUE(r.pass) << describe(r);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double> frozen = params[i].grad_values();
    for (std::size_t k = 0; k < frozen.size(); ++k) {
      const double denom = std::max({std::abs(frozen[k]), std::abs(live_grads[i][k]), 1e-8});
      EXPECT_LE(std::abs(frozen[k] - live_grads[i][k]) / denom, 1e-4) << named[i].first;
    }
  }
}

TEST(VqkdObjective, GradientDescentReducesLoss) {
  std::size_t improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    VqkdConfig cfg = tiny_config();
    cfg.codebook_size = 8;
    Rng rng(seed);
    const VqkdTokenizer tok = VqkdTokenizer::create(cfg, rng);
    const SyntheticTeacher teacher = SyntheticTeacher::create(cfg.patch_dim(), cfg.teacher_dim, seed);
    VqkdBatch batch;
    for (int i = 0; i < 4; ++i) {
      batch.images.push_back(random_image(8, 8, 1, rng));
      batch.teacher_features.push_back(teacher.features(patchify(batch.images.back(), cfg.patch)));
    }
    std::vector<Tensor> params;
    for (const auto& [name, p] : tok.parameters()) params.push_back(p);
    double first = 0.0, last = 0.0;
    for (int step = 0; step <= 100; ++step) {
      for (Tensor p : params) p.zero_grad();
      const VqkdTerms t = vqkd_objective(batch, tok.encoder, tok.codebook, tok.decoder, cfg.patch);
      if (step == 0) first = t.loss.item();
      last = t.loss.item();
      if (step == 100) break;
      t.loss.backward();
      for (Tensor p : params) {
        const std::vector<double> g = p.grad_values();
        auto v = p.mutable_data();
        for (std::size_t i = 0; i < g.size(); ++i) v[i] -= 0.05 * g[i];
      }
    }
    if (last < first) ++improved;
  }
  EXPECT_GE(improved, 9u);
}

}  // namespace
}  // namespace mwvqa::vision
