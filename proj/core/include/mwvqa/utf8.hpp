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

#ifndef MWVQA_UTF8_HPP_
#define MWVQA_UTF8_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mwvqa::utf8 {

// Byte length of the character starting at text[pos]. Malformed or
// truncated sequences count as a single byte so every input is walkable.
std::size_t char_length(std::string_view text, std::size_t pos);

// Byte offsets of every character start, followed by text.size().
std::vector<std::size_t> char_boundaries(std::string_view text);

// Lowercases ASCII and the Latin ranges Vietnamese uses (Latin-1,
// Latin Extended-A/B letters with case pairs, Latin Extended Additional).
// Everything else passes through byte-for-byte.
std::string to_lower(std::string_view text);

// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace mwvqa::utf8

#endif  // MWVQA_UTF8_HPP_
