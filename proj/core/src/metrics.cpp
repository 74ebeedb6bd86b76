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

#include "mwvqa/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mwvqa/errors.hpp"
#include "mwvqa/utf8.hpp"

namespace mwvqa::metrics {

Taxonomy Taxonomy::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  Taxonomy t;
  auto intern = [&t](const std::string& name) {
    auto [it, inserted] = t.ids_.emplace(name, t.names_.size());
    if (inserted) {
      t.names_.push_back(name);
      t.parent_.push_back(static_cast<std::size_t>(-1));
    }
    return it->second;
  };
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [parent, child] : edges) {
    if (parent.empty() || child.empty()) throw FormatError("taxonomy: empty node name");
    if (parent == child) throw FormatError("taxonomy: self loop on '" + parent + "'");
    if (!seen.insert({parent, child}).second) {
      throw FormatError("taxonomy: duplicate edge " + parent + " -> " + child);
    }
    const std::size_t p = intern(parent);
    const std::size_t c = intern(child);
    if (t.parent_[c] != static_cast<std::size_t>(-1)) {
      throw FormatError("taxonomy: '" + child + "' has two parents");
    }
    t.parent_[c] = p;
  }
  if (t.names_.empty()) throw FormatError("taxonomy: no edges");

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < t.names_.size(); ++i) {
    if (t.parent_[i] == static_cast<std::size_t>(-1)) roots.push_back(i);
  }
  if (roots.size() != 1) {
    throw FormatError("taxonomy: expected exactly one root, found " +
                      std::to_string(roots.size()));
  }
  t.root_ = roots.front();
  t.parent_[t.root_] = t.root_;

  // Depth by walking to the root; a walk longer than the node count means a
  // cycle detached from the root.
  t.depth_.assign(t.names_.size(), 0);
  t.depth_[t.root_] = 1;
  for (std::size_t i = 0; i < t.names_.size(); ++i) {
    std::vector<std::size_t> path;
    std::size_t cur = i;
    while (t.depth_[cur] == 0) {
      path.push_back(cur);
      if (path.size() > t.names_.size()) {
        throw FormatError("taxonomy: cycle through '" + t.names_[i] + "'");
      }
      cur = t.parent_[cur];
    }
    std::size_t d = t.depth_[cur];
    for (auto it = path.rbegin(); it != path.rend(); ++it) t.depth_[*it] = ++d;
  }
  return t;
}

Taxonomy Taxonomy::parse(std::string_view text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(source + ":" + std::to_string(line_no) +
                        ": expected 'parent<TAB>child'");
    }
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  try {
    return from_edges(edges);
  } catch (const FormatError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open taxonomy file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

bool Taxonomy::contains(std::string_view word) const {
  return ids_.find(std::string(word)) != ids_.end();
}

std::size_t Taxonomy::index(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) throw RangeError("taxonomy has no node '" + std::string(word) + "'");
  return it->second;
}

std::size_t Taxonomy::depth(std::string_view word) const { return depth_[index(word)]; }

const std::string& Taxonomy::lowest_common_subsumer(std::string_view a,
                                                    std::string_view b) const {
  std::size_t x = index(a), y = index(b);
  while (depth_[x] > depth_[y]) x = parent_[x];
  while (depth_[y] > depth_[x]) y = parent_[y];
  while (x != y) {
    x = parent_[x];
    y = parent_[y];
  }
  return names_[x];
}

std::string normalize_answer(std::string_view answer) {
  std::string out;
  for (const auto& piece : utf8::split_whitespace(utf8::to_lower(answer))) {
    if (!out.empty()) out += ' ';
    out += piece;
  }
  return out;
}

std::vector<std::string> answer_tokens(std::string_view answer) {
  return utf8::split_whitespace(normalize_answer(answer));
}

PrecisionRecallF1 precision_recall_f1(const std::vector<std::string>& predicted,
                                      const std::vector<std::string>& gold) {
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& g : gold) ++gold_counts[g];
  std::size_t overlap = 0;
  for (const auto& p : predicted) {
    auto it = gold_counts.find(p);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  PrecisionRecallF1 r;
  if (!predicted.empty()) r.precision = static_cast<double>(overlap) / predicted.size();
  if (!gold.empty()) r.recall = static_cast<double>(overlap) / gold.size();
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

double accuracy(const std::vector<std::string>& predicted,
                const std::vector<std::string>& gold) {
  return predicted == gold ? 1.0 : 0.0;
}

double wup_similarity(std::string_view a, std::string_view b, const Taxonomy& taxonomy) {
  if (!taxonomy.contains(a) || !taxonomy.contains(b)) return a == b ? 1.0 : 0.0;
  const auto& lcs = taxonomy.lowest_common_subsumer(a, b);
  return 2.0 * static_cast<double>(taxonomy.depth(lcs)) /
         static_cast<double>(taxonomy.depth(a) + taxonomy.depth(b));
}

double wups(const std::vector<std::string>& predicted,
            const std::vector<std::string>& gold, double threshold,
            const Taxonomy& taxonomy) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ContractError("wups: threshold must lie in [0, 1]");
  }
  if (predicted.empty() || gold.empty()) return 0.0;
  auto pair_score = [&](const std::string& a, const std::string& b) {
    const double wp = wup_similarity(a, b, taxonomy);
    return wp >= threshold ? wp : 0.0;
  };
  auto directed = [&](const std::vector<std::string>& from,
                      const std::vector<std::string>& to) {
    double product = 1.0;
    for (const auto& a : from) {
      double best = 0.0;
      for (const auto& b : to) best = std::max(best, pair_score(a, b));
      product *= best;
    }
    return product;
  };
  return std::min(directed(predicted, gold), directed(gold, predicted));
}

ExampleScores score_example(std::string_view predicted, std::string_view gold,
                            const Taxonomy* taxonomy) {
  const auto pa = answer_tokens(predicted);
  const auto ga = answer_tokens(gold);
  ExampleScores s;
  s.accuracy = accuracy(pa, ga);
  const auto prf = precision_recall_f1(pa, ga);
  s.precision = prf.precision;
  s.recall = prf.recall;
  s.f1 = prf.f1;
  if (taxonomy) {
    s.wups_0 = wups(pa, ga, 0.0, *taxonomy);
    s.wups_9 = wups(pa, ga, 0.9, *taxonomy);
  }
  return s;
}

MetricsReport aggregate(const std::vector<ExampleScores>& per_example) {
  if (per_example.empty()) throw ContractError("aggregate: no examples to score");
  MetricsReport r;
  r.n_examples = per_example.size();
  const double n = static_cast<double>(per_example.size());
  bool have_wups = true;
  double w0 = 0.0, w9 = 0.0;
  for (const auto& s : per_example) {
    r.accuracy += s.accuracy;
    r.precision += s.precision;
    r.recall += s.recall;
    r.f1 += s.f1;
    if (s.wups_0 && s.wups_9) {
      w0 += *s.wups_0;
      w9 += *s.wups_9;
    } else {
      have_wups = false;
    }
  }
  r.accuracy /= n;
  r.precision /= n;
  r.recall /= n;
  r.f1 /= n;
  if (have_wups) {
    r.wups_0 = w0 / n;
    r.wups_9 = w9 / n;
  }
  return r;
}

}  // namespace mwvqa::metrics
