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

#ifndef MWVQA_DATASET_HPP_
#define MWVQA_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mwvqa {

enum class QuestionType { Object, Number, Color, Location };

std::string_view to_string(QuestionType type);
std::optional<QuestionType> parse_question_type(std::string_view name);

struct QAPair {
  std::string id;
  std::string image_path;  // as written in the file
  std::string question;
  std::string answer;
  std::optional<QuestionType> type;
  std::vector<std::string> options;  // empty: the whole answer vocabulary
};

struct Dataset {
  std::vector<QAPair> examples;
  std::vector<std::string> answer_vocab;  // sorted, distinct
  std::filesystem::path base_dir;         // image paths resolve against this

  std::filesystem::path image_file(const QAPair& pair) const;
};

// Sorted distinct answers together with every listed option.
std::vector<std::string> build_answer_vocab(const std::vector<QAPair>& examples);

// JSONL, one object per line: image, question, answer, optional type, id
// and options. Blank lines are skipped. Errors name the line and field.
Dataset parse_dataset(std::string_view text, const std::string& source,
                      const std::filesystem::path& base_dir);
Dataset load_dataset(const std::filesystem::path& path);

// 8:2 split after a seeded shuffle. Both halves keep the full answer
// vocabulary of `all`.
struct DatasetSplit {
  Dataset train;
  Dataset test;
};
DatasetSplit split_dataset(const Dataset& all, std::uint64_t seed);

}  // namespace mwvqa

#endif  // MWVQA_DATASET_HPP_
