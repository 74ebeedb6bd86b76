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

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "mwvqa/errors.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/text_tokenizer.hpp"

namespace mwvqa::text {
namespace {

std::vector<std::string> ordinary(const Vocab& v) {
  return {v.tokens().begin() + kNumReserved, v.tokens().end()};
}

TEST(BuildVocab, FrequencyOrder) {
  const Vocab v = build_vocab({"a a b"}, 7);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(ordinary(v), (std::vector<std::string>{"a", "b"}));
}

TEST(BuildVocab, TruncatesByFrequency) {
  const Vocab v = build_vocab({"a a b"}, 6);
  EXPECT_EQ(ordinary(v), (std::vector<std::string>{"a"}));
}

TEST(BuildVocab, EmptyCorpusGivesReservedOnly) {
  const Vocab v = build_vocab({}, 100);
  EXPECT_EQ(v.size(), kNumReserved);
  for (std::size_t i = 0; i < kNumReserved; ++i) EXPECT_EQ(v.token(i), kReservedTokens[i]);
}

TEST(BuildVocab, TiesAreLexicographic) {
  const Vocab v = build_vocab({"c b a", "b c a d"}, 100);
  EXPECT_EQ(ordinary(v), (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(BuildVocab, TooSmallIsValidationError) {
  EXPECT_THROW(build_vocab({"a"}, 4), ValidationError);
}

TEST(Vocab, RejectsDuplicatesAndReservedSpellings) {
  EXPECT_THROW(Vocab::from_tokens({"a", "a"}), ValidationError);
  EXPECT_THROW(Vocab::from_tokens({"<unk>"}), ValidationError);
  EXPECT_THROW(Vocab::from_tokens({""}), ValidationError);
  EXPECT_THROW(Vocab::from_tokens({"a b"}), ValidationError);
}

TEST(Vocab, IdsAreDenseAndBijective) {
  const Vocab v = Vocab::from_tokens({"lò", "vi", "sóng"});
  for (std::size_t id = kNumReserved; id < v.size(); ++id) {
    EXPECT_EQ(v.find(v.token(id)), id);
  }
  EXPECT_FALSE(v.find("<mask>").has_value());
}

TEST(Vocab, TextRoundTrip) {
  const Vocab v = Vocab::from_tokens({"màu", "đỏ", "x"});
  const Vocab back = Vocab::parse(v.to_text());
  EXPECT_EQ(back.tokens(), v.tokens());
}

TEST(Vocab, FileRoundTrip) {
  const std::filesystem::path p = std::filesystem::path(MWVQA_TEST_TMP) / "vocab_roundtrip.txt";
  std::filesystem::create_directories(p.parent_path());
  const Vocab v = Vocab::from_tokens({"hộp", "que"});
  v.save(p);
  EXPECT_EQ(Vocab::load(p).tokens(), v.tokens());
}

TEST(Vocab, MissingFileIsIoError) {
  EXPECT_THROW(Vocab::load("/nonexistent/vocab.txt"), IoError);
}

TEST(Encode, FullMatch) {
  const Vocab v = Vocab::from_tokens({"lò", "vi", "sóng"});
  EXPECT_EQ(encode("lò vi sóng", v).ids, (std::vector<std::size_t>{5, 6, 7}));
}

TEST(Encode, GreedyLongestMatch) {
  const Vocab v = Vocab::from_tokens({"ab", "a", "b"});
  EXPECT_EQ(encode("aab", v).ids, (std::vector<std::size_t>{6, 5}));
}

TEST(Encode, UnknownWordGivesUnk) {
  const Vocab v = Vocab::from_tokens({"a"});
  const TokenSeq s = encode("xyz", v);
  ASSERT_FALSE(s.ids.empty());
  for (std::size_t id : s.ids) EXPECT_EQ(id, kUnkId);
}

TEST(Encode, UnkAdvancesOneCodepoint) {
  const Vocab v = Vocab::from_tokens({"a"});
  // "đa": one two-byte codepoint then a match.
  EXPECT_EQ(encode("đa", v).ids, (std::vector<std::size_t>{kUnkId, 5}));
}

TEST(Encode, TotalOnArbitraryBytes) {
  const Vocab v = Vocab::from_tokens({"a", "b"});
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t n = rng.uniform_index(12);
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(rng.uniform_index(256));
    const TokenSeq a = encode(s, v);
    EXPECT_EQ(a.ids, encode(s, v).ids);
    for (std::size_t id : a.ids) EXPECT_TRUE(id == kUnkId || !Vocab::is_reserved(id));
  }
}

TEST(Encode, NeverEmitsReservedIdsOtherThanUnk) {
  const Vocab v = Vocab::from_tokens({"<", "mask", ">", "pad"});
  for (std::size_t id : encode("<mask> <pad> <cls>", v).ids) {
    EXPECT_TRUE(id == kUnkId || id >= kNumReserved);
  }
}

TEST(Decode, JoinsWithSpaces) {
  const Vocab v = Vocab::from_tokens({"ab", "a", "b"});
  EXPECT_EQ(decode(TokenSeq{{6, 5}}, v), "a ab");
}

TEST(Decode, ReservedOnlyGivesEmptyString) {
  const Vocab v = Vocab::from_tokens({"a"});
  EXPECT_EQ(decode(TokenSeq{{kClsId, kMaskId, kSepId, kPadId}}, v), "");
}

TEST(Decode, OutOfRangeIsRangeError) {
  const Vocab v = Vocab::from_tokens({"a"});
  EXPECT_THROW(decode(TokenSeq{{6}}, v), RangeError);
}

TEST(Decode, InvertsEncodeOnVocabText) {
  const Vocab v = build_vocab({"có bao nhiêu cái hộp màu đỏ", "que ở bên trái"}, 100);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::string s;
    const std::size_t n = 1 + rng.uniform_index(8);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += v.token(kNumReserved + rng.uniform_index(v.size() - kNumReserved));
    }
    EXPECT_EQ(decode(encode(s, v), v), s);
  }
}

}  // namespace
}  // namespace mwvqa::text
