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

#ifndef MWVQA_SYNTHETIC_HPP_
#define MWVQA_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace mwvqa {

struct SyntheticSpec {
  std::size_t n = 32;       // lines in dataset.jsonl
  std::size_t test_n = 16;  // lines in test.jsonl, drawn after the training lines
  std::size_t image_size = 16;
  std::size_t patch = 4;  // one grid cell per patch
  std::uint64_t seed = 0;
};

// Writes dataset.jsonl, test.jsonl, taxonomy.tsv and images/*.ppm under
// out_dir. Each scene holds one to three objects of a single color and kind
// in the left or right half of the grid. Question types cycle through color,
// count, side and kind. Output depends only on the argument values.
void gen_synthetic(const std::filesystem::path& out_dir, const SyntheticSpec& spec);

}  // namespace mwvqa

#endif  // MWVQA_SYNTHETIC_HPP_
