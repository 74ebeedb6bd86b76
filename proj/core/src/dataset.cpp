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

#include "mwvqa/dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mwvqa/errors.hpp"
#include "mwvqa/rng.hpp"

namespace mwvqa {
namespace {

constexpr std::array<std::string_view, 4> kTypeNames = {"Object", "Number", "Color",
                                                        "Location"};

std::string required_string(const nlohmann::json& obj, const char* field,
                            const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DatasetError(where + "missing field \"" + field + "\"");
  if (!it->is_string()) throw DatasetError(where + "field \"" + field + "\" must be a string");
  std::string value = it->get<std::string>();
  if (value.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw DatasetError(where + "field \"" + field + "\" is empty");
  }
  return value;
}

}  // namespace

std::string_view to_string(QuestionType type) {
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<QuestionType> parse_question_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<QuestionType>(i);
  }
  return std::nullopt;
}

std::filesystem::path Dataset::image_file(const QAPair& pair) const {
  const std::filesystem::path p(pair.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> build_answer_vocab(const std::vector<QAPair>& examples) {
  std::set<std::string> answers;
  for (const QAPair& ex : examples) {
    answers.insert(ex.answer);
    answers.insert(ex.options.begin(), ex.options.end());
  }
  return {answers.begin(), answers.end()};
}

Dataset parse_dataset(std::string_view text, const std::string& source,
                      const std::filesystem::path& base_dir) {
  Dataset ds;
  ds.base_dir = base_dir;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DatasetError(where + "expected a JSON object");

    QAPair pair;
    pair.image_path = required_string(obj, "image", where);
    pair.question = required_string(obj, "question", where);
    pair.answer = required_string(obj, "answer", where);
    if (auto it = obj.find("type"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw DatasetError(where + "field \"type\" must be a string");
      const auto type = parse_question_type(it->get<std::string>());
      if (!type) {
        throw DatasetError(where + "field \"type\" must be Object, Number, Color or Location, got \"" +
                           it->get<std::string>() + "\"");
      }
      pair.type = type;
    }
    if (auto it = obj.find("id"); it != obj.end()) {
      if (it->is_string()) {
        pair.id = it->get<std::string>();
      } else if (it->is_number_integer()) {
        pair.id = it->dump();
      } else {
        throw DatasetError(where + "field \"id\" must be a string or an integer");
      }
    } else {
      pair.id = std::to_string(ds.examples.size());
    }
    if (!ids.insert(pair.id).second) {
      throw DatasetError(where + "duplicate id \"" + pair.id + "\"");
    }
    if (auto it = obj.find("options"); it != obj.end()) {
      if (!it->is_array() || it->empty()) {
        throw DatasetError(where + "field \"options\" must be a non-empty array of strings");
      }
      for (const auto& opt : *it) {
        if (!opt.is_string() || opt.get<std::string>().empty()) {
          throw DatasetError(where + "field \"options\" must be a non-empty array of strings");
        }
        pair.options.push_back(opt.get<std::string>());
      }
      std::set<std::string> distinct(pair.options.begin(), pair.options.end());
      if (distinct.size() != pair.options.size()) {
        throw DatasetError(where + "field \"options\" repeats an entry");
      }
      if (!distinct.count(pair.answer)) {
        throw DatasetError(where + "answer \"" + pair.answer + "\" is not among the options");
      }
    }
    ds.examples.push_back(std::move(pair));
  }
  ds.answer_vocab = build_answer_vocab(ds.examples);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.string(), path.parent_path());
}

DatasetSplit split_dataset(const Dataset& all, std::uint64_t seed) {
  std::vector<std::size_t> order(all.examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  const std::size_t n_train = (order.size() * 8) / 10;
  DatasetSplit split;
  split.train.base_dir = split.test.base_dir = all.base_dir;
  split.train.answer_vocab = split.test.answer_vocab = all.answer_vocab;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).examples.push_back(all.examples[order[i]]);
  }
  return split;
}

}  // namespace mwvqa
