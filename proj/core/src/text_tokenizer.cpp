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

#include "mwvqa/text_tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "mwvqa/errors.hpp"
#include "mwvqa/utf8.hpp"

namespace mwvqa::text {

Vocab::Vocab() {
  for (auto t : kReservedTokens) tokens_.emplace_back(t);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& ordinary) {
  Vocab v;
  for (const auto& tok : ordinary) {
    if (tok.empty()) throw ValidationError("vocab: empty token");
    if (utf8::split_whitespace(tok).size() != 1 ||
        utf8::split_whitespace(tok).front() != tok) {
      throw ValidationError("vocab: token contains whitespace: '" + tok + "'");
    }
    if (std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) !=
        kReservedTokens.end()) {
      throw ValidationError("vocab: reserved token listed as ordinary: " + tok);
    }
    if (!v.ordinary_ids_.emplace(tok, v.tokens_.size()).second) {
      throw ValidationError("vocab: duplicate token '" + tok + "'");
    }
    v.tokens_.push_back(tok);
    v.max_bytes_ = std::max(v.max_bytes_, tok.size());
  }
  return v;
}

Vocab Vocab::parse(std::string_view text, const std::string& source) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  try {
    return from_tokens(lines);
  } catch (const ValidationError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocab file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string Vocab::to_text() const {
  std::string out;
  for (std::size_t i = kNumReserved; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  out << to_text();
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw RangeError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::optional<std::size_t> Vocab::find(std::string_view token) const {
  auto it = ordinary_ids_.find(std::string(token));
  if (it == ordinary_ids_.end()) return std::nullopt;
  return it->second;
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t max_size) {
  if (max_size < kNumReserved) {
    throw ContractError("build_vocab: max_size " + std::to_string(max_size) +
                        " cannot hold the " + std::to_string(kNumReserved) +
                        " reserved tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& word : utf8::split_whitespace(line)) {
      if (std::find(kReservedTokens.begin(), kReservedTokens.end(), word) !=
          kReservedTokens.end()) {
        continue;
      }
      ++counts[word];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort by frequency keeps the
  // lexicographic tie order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab::from_tokens(tokens);
}

TokenSeq encode(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  for (const auto& word : utf8::split_whitespace(text)) {
    const std::vector<std::size_t> bounds = utf8::char_boundaries(word);
    std::size_t start = 0;  // index into bounds
    const std::size_t last = bounds.size() - 1;
    while (start < last) {
      std::optional<std::size_t> match;
      std::size_t end = last;
      for (; end > start; --end) {
        const std::size_t bytes = bounds[end] - bounds[start];
        if (bytes > vocab.max_token_bytes()) continue;
        match = vocab.find(std::string_view(word).substr(bounds[start], bytes));
        if (match) break;
      }
      if (match) {
        seq.ids.push_back(*match);
        start = end;
      } else {
        seq.ids.push_back(kUnkId);
        ++start;
      }
    }
  }
  return seq;
}

std::string decode(const TokenSeq& seq, const Vocab& vocab) {
  std::string out;
  for (std::size_t id : seq.ids) {
    const std::string& tok = vocab.token(id);
    if (Vocab::is_reserved(id)) continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace mwvqa::text
