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

// Independent reference implementations used as test oracles. Nothing
// here calls into the library under test.

#ifndef MWVQA_TESTS_ORACLES_HPP_
#define MWVQA_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mwvqa::oracle {

// argmax_j cos(h, v_j) over the rows of a row-major [k x d] table, ties to
// the lowest index.
inline std::size_t cosine_argmax(std::span<const double> h, std::span<const double> table,
                                 std::size_t k, std::size_t d) {
  double hn = 0.0;
  for (double v : h) hn += v * v;
  hn = std::sqrt(hn);
  std::size_t best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double dot = 0.0, vn = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += h[c] * table[j * d + c];
      vn += table[j * d + c] * table[j * d + c];
    }
    const double cos = dot / (hn * std::sqrt(vn));
    if (cos > best_cos) {
      best_cos = cos;
      best = j;
    }
  }
  return best;
}

struct ReferenceScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double wups_0 = 0.0;
  double wups_9 = 0.0;
};

// Brute-force answer scorer over a taxonomy given as (parent, child)
// edges: explicit ancestor chains, pairwise token matching and longhand
// products. ASCII lowercasing only, so callers keep answers ASCII.
class ReferenceScorer {
 public:
  explicit ReferenceScorer(const std::vector<std::pair<std::string, std::string>>& edges) {
    for (const auto& [p, c] : edges) {
      parent_[c] = p;
      nodes_.push_back(p);
      nodes_.push_back(c);
    }
  }

  double wp(const std::string& a, const std::string& b) const {
    if (!known(a) || !known(b)) return a == b ? 1.0 : 0.0;
    const auto ca = chain(a), cb = chain(b);
    for (std::size_t i = 0; i < ca.size(); ++i) {
      for (std::size_t j = 0; j < cb.size(); ++j) {
        if (ca[i] == cb[j]) {
          const double lcs_depth = static_cast<double>(ca.size() - i);
          return 2.0 * lcs_depth / static_cast<double>(ca.size() + cb.size());
        }
      }
    }
    return 0.0;
  }

  static std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ' ' || ch == '\t' || ch == '\n') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  double wups(const std::vector<std::string>& pa, const std::vector<std::string>& ga,
              double threshold) const {
    if (pa.empty() || ga.empty()) return 0.0;
    auto s = [&](const std::string& a, const std::string& b) {
      const double w = wp(a, b);
      return w >= threshold ? w : 0.0;
    };
    double left = 1.0, right = 1.0;
    for (const auto& a : pa) {
      double best = 0.0;
      for (const auto& b : ga) best = std::max(best, s(a, b));
      left *= best;
    }
    for (const auto& b : ga) {
      double best = 0.0;
      for (const auto& a : pa) best = std::max(best, s(a, b));
      right *= best;
    }
    return std::min(left, right);
  }

  ReferenceScores score(const std::string& pred, const std::string& gold) const {
    const auto pa = tokens(pred), ga = tokens(gold);
    ReferenceScores e;
    std::size_t common = 0;
    std::vector<bool> used(ga.size(), false);
    for (const auto& x : pa) {
      for (std::size_t j = 0; j < ga.size(); ++j) {
        if (!used[j] && ga[j] == x) {
          used[j] = true;
          ++common;
          break;
        }
      }
    }
    e.precision = pa.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(pa.size());
    e.recall = ga.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(ga.size());
    e.f1 = e.precision + e.recall == 0.0
               ? 0.0
               : 2 * e.precision * e.recall / (e.precision + e.recall);
    e.accuracy = pa == ga ? 1.0 : 0.0;
    e.wups_0 = wups(pa, ga, 0.0);
    e.wups_9 = wups(pa, ga, 0.9);
    return e;
  }

 private:
  bool known(const std::string& w) const {
    return std::find(nodes_.begin(), nodes_.end(), w) != nodes_.end();
  }

  std::vector<std::string> chain(const std::string& w) const {  // w, ..., root
    std::vector<std::string> out = {w};
    while (parent_.count(out.back())) out.push_back(parent_.at(out.back()));
    return out;
  }

  std::map<std::string, std::string> parent_;
  std::vector<std::string> nodes_;
};

}  // namespace mwvqa::oracle

#endif  // MWVQA_TESTS_ORACLES_HPP_
