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

#ifndef MWVQA_METRICS_HPP_
#define MWVQA_METRICS_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mwvqa::metrics {

// Rooted tree over words. depth(root) == 1.
class Taxonomy {
 public:
  // Edges are (parent, child). Throws FormatError on duplicate edges, a
  // child with two parents, cycles, or anything other than one root.
  static Taxonomy from_edges(const std::vector<std::pair<std::string, std::string>>& edges);
  // "parent<TAB>child" per line, UTF-8. Blank lines are skipped.
  static Taxonomy load(const std::filesystem::path& path);
  static Taxonomy parse(std::string_view text, const std::string& source = "<memory>");

  bool contains(std::string_view word) const;
  std::size_t depth(std::string_view word) const;
  // Deepest common ancestor (a node counts as its own ancestor).
  const std::string& lowest_common_subsumer(std::string_view a, std::string_view b) const;
  const std::string& root() const { return names_[root_]; }
  std::size_t size() const { return names_.size(); }

 private:
  std::size_t index(std::string_view word) const;

  std::vector<std::string> names_;
  std::vector<std::size_t> parent_;  // root points at itself
  std::vector<std::size_t> depth_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t root_ = 0;
};

// Lowercase, trim, collapse internal whitespace. Diacritics are kept.
std::string normalize_answer(std::string_view answer);
std::vector<std::string> answer_tokens(std::string_view answer);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Multiset overlap. Empty prediction gives P = 0, empty gold gives R = 0,
// and P + R == 0 gives F1 = 0.
PrecisionRecallF1 precision_recall_f1(const std::vector<std::string>& predicted,
                                      const std::vector<std::string>& gold);

// 1 when the token sequences are identical, else 0.
double accuracy(const std::vector<std::string>& predicted,
                const std::vector<std::string>& gold);

// 2 depth(lcs) / (depth(a) + depth(b)). A word missing from the taxonomy
// scores 1 against an identical string and 0 otherwise.
double wup_similarity(std::string_view a, std::string_view b, const Taxonomy& taxonomy);

// Thresholded WUPS: pair score is WP when WP >= threshold, else 0; the
// answer score is min(prod_a max_b s(a, b), prod_b max_a s(a, b)). Empty
// prediction or gold scores 0.
double wups(const std::vector<std::string>& predicted,
            const std::vector<std::string>& gold, double threshold,
            const Taxonomy& taxonomy);

struct ExampleScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> wups_0;
  std::optional<double> wups_9;
};

// All metrics for one (prediction, gold) pair after normalization. WUPS is
// left empty without a taxonomy.
ExampleScores score_example(std::string_view predicted, std::string_view gold,
                            const Taxonomy* taxonomy);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> wups_0;
  std::optional<double> wups_9;
  std::size_t n_examples = 0;
};

// Arithmetic means. WUPS means are reported only when every example has
// them. Throws ContractError on an empty list.
MetricsReport aggregate(const std::vector<ExampleScores>& per_example);

}  // namespace mwvqa::metrics

#endif  // MWVQA_METRICS_HPP_
