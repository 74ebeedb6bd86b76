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

#ifndef MWVQA_MASKING_HPP_
#define MWVQA_MASKING_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mwvqa::masking {

inline constexpr double kTextMonomodalRatio = 0.15;
inline constexpr double kTextPairedRatio = 0.50;
inline constexpr double kPatchRatio = 0.40;
inline constexpr double kMinAspect = 0.3;

struct MaskSet {
  std::vector<std::size_t> positions;  // sorted, distinct
  std::size_t total = 0;

  bool contains(std::size_t pos) const;
  std::vector<bool> as_flags() const;
};

// floor(total * ratio), with a 1e-9 guard so ratios such as 0.29 * 100 do
// not lose a position to binary rounding.
std::size_t target_count(std::size_t total, double ratio);

// Exactly target_count(len, ratio) positions, uniform without replacement.
MaskSet mask_text(std::size_t len, double ratio, std::uint64_t seed);

// Union of random axis-aligned rectangles (area >= min_block, aspect in
// [0.3, 1/0.3] before clipping to the grid) grown until coverage reaches
// target_count(grid_h * grid_w, ratio). Overshoot is removed from the last
// rectangle's newly covered cells in reverse row-major order. The first
// rectangle never exceeds the target, so it survives trimming intact.
MaskSet mask_blockwise(std::size_t grid_h, std::size_t grid_w, double ratio,
                       std::size_t min_block, std::uint64_t seed);

// Block size used when the caller has no preference: 16 on grids of 14x14
// or larger, 4 otherwise, never above the target count.
std::size_t default_min_block(std::size_t grid_h, std::size_t grid_w, double ratio);

}  // namespace mwvqa::masking

#endif  // MWVQA_MASKING_HPP_
