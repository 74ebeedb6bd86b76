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

#ifndef MWVQA_TEXT_TOKENIZER_HPP_
#define MWVQA_TEXT_TOKENIZER_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mwvqa::text {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kMaskId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kSepId = 3;
inline constexpr std::size_t kUnkId = 4;
inline constexpr std::size_t kNumReserved = 5;
inline constexpr std::array<std::string_view, kNumReserved> kReservedTokens = {
    "<pad>", "<mask>", "<cls>", "<sep>", "<unk>"};

// Bijective token <-> id table. Ids 0..4 are the reserved tokens; ordinary
// tokens follow densely.
class Vocab {
 public:
  Vocab();

  // Throws ValidationError on duplicates, empty tokens, whitespace inside a
  // token, or a reserved spelling.
  static Vocab from_tokens(const std::vector<std::string>& ordinary);

  // One ordinary token per line; line i gets id kNumReserved + i.
  // One ordinary token per line, in id order after the reserved block.
  static Vocab parse(std::string_view text, const std::string& source = "<memory>");
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const;
  // Lookup among ordinary tokens only; reserved spellings never match.
  std::optional<std::size_t> find(std::string_view token) const;
  std::size_t max_token_bytes() const { return max_bytes_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_reserved(std::size_t id) { return id < kNumReserved; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ordinary_ids_;
  std::size_t max_bytes_ = 0;
};

struct TokenSeq {
  std::vector<std::size_t> ids;
};

// Keeps the most frequent whitespace-delimited syllables (ties broken
// lexicographically) until the vocabulary, reserved block included, holds
// max_size entries.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size);

// Greedy longest match within each whitespace-separated word. A position
// with no match emits <unk> and skips one character.
TokenSeq encode(std::string_view text, const Vocab& vocab);

// Ordinary tokens joined by single spaces; reserved ids are dropped.
std::string decode(const TokenSeq& seq, const Vocab& vocab);

}  // namespace mwvqa::text

#endif  // MWVQA_TEXT_TOKENIZER_HPP_
