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

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "mwvqa/errors.hpp"
#include "mwvqa/masking.hpp"

namespace mwvqa::masking {
namespace {

// True when some fully masked axis-aligned rectangle has area >= min_area.
bool has_full_rectangle(const MaskSet& m, std::size_t gh, std::size_t gw, std::size_t min_area) {
  const std::vector<bool> f = m.as_flags();
  for (std::size_t top = 0; top < gh; ++top) {
    for (std::size_t left = 0; left < gw; ++left) {
      for (std::size_t bottom = top + 1; bottom <= gh; ++bottom) {
        for (std::size_t right = left + 1; right <= gw; ++right) {
          if ((bottom - top) * (right - left) < min_area) continue;
          bool full = true;
          for (std::size_t y = top; y < bottom && full; ++y) {
            for (std::size_t x = left; x < right && full; ++x) full = f[y * gw + x];
          }
          if (full) return true;
        }
      }
    }
  }
  return false;
}

void expect_well_formed(const MaskSet& m) {
  EXPECT_TRUE(std::is_sorted(m.positions.begin(), m.positions.end()));
  EXPECT_EQ(std::adjacent_find(m.positions.begin(), m.positions.end()), m.positions.end());
  for (std::size_t p : m.positions) EXPECT_LT(p, m.total);
}

TEST(TargetCount, Floors) {
  EXPECT_EQ(target_count(196, 0.4), 78u);
  EXPECT_EQ(target_count(20, 0.15), 3u);
  EXPECT_EQ(target_count(100, 0.29), 29u);
  EXPECT_EQ(target_count(7, 0.5), 3u);
}

TEST(MaskText, LengthTwentyAtFifteenPercent) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const MaskSet m = mask_text(20, 0.15, seed);
    EXPECT_EQ(m.positions.size(), 3u);
    EXPECT_EQ(m.total, 20u);
    expect_well_formed(m);
  }
}

TEST(MaskText, RatioZeroAndOne) {
  EXPECT_TRUE(mask_text(12, 0.0, 1).positions.empty());
  const MaskSet all = mask_text(12, 1.0, 1);
  ASSERT_EQ(all.positions.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(all.positions[i], i);
}

TEST(MaskText, RatioOutsideUnitIntervalIsContractError) {
  EXPECT_THROW(mask_text(10, -0.1, 0), ContractError);
  EXPECT_THROW(mask_text(10, 1.5, 0), ContractError);
}

TEST(MaskText, ExactCountOverSizesAndRatios) {
  for (std::size_t len = 0; len <= 40; len += 3) {
    for (double ratio : {0.0, 0.1, 0.15, 0.29, 0.5, 0.77, 1.0}) {
      const MaskSet m = mask_text(len, ratio, len * 31 + 7);
      EXPECT_EQ(m.positions.size(), target_count(len, ratio));
      expect_well_formed(m);
    }
  }
}

TEST(MaskText, SameSeedSameMask) {
  EXPECT_EQ(mask_text(50, 0.3, 9).positions, mask_text(50, 0.3, 9).positions);
}

TEST(MaskText, PositionFrequencyIsUniform) {
  const std::size_t len = 20, trials = 10000;
  std::vector<std::size_t> hits(len, 0);
  for (std::size_t seed = 0; seed < trials; ++seed) {
    for (std::size_t p : mask_text(len, 0.15, seed).positions) ++hits[p];
  }
  for (std::size_t p = 0; p < len; ++p) {
    const double freq = static_cast<double>(hits[p]) / trials;
    EXPECT_NEAR(freq, 0.15, 0.05) << "position " << p;
  }
}

TEST(MaskBlockwise, FullGridAtFortyPercent) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const MaskSet m = mask_blockwise(14, 14, 0.4, 16, seed);
    EXPECT_EQ(m.positions.size(), 78u) << "seed " << seed;
    expect_well_formed(m);
    EXPECT_TRUE(has_full_rectangle(m, 14, 14, 16)) << "seed " << seed;
  }
}

TEST(MaskBlockwise, RatioZeroAndOne) {
  EXPECT_TRUE(mask_blockwise(14, 14, 0.0, 16, 3).positions.empty());
  EXPECT_EQ(mask_blockwise(14, 14, 1.0, 1, 3).positions.size(), 196u);
}

TEST(MaskBlockwise, InfeasibleBlockIsContractError) {
  EXPECT_THROW(mask_blockwise(4, 4, 0.4, 7, 0), ContractError);
}

TEST(MaskBlockwise, ExactCountAndRectangleAcrossShapes) {
  for (std::size_t gh : {2u, 4u, 5u, 7u, 14u}) {
    for (std::size_t gw : {3u, 4u, 9u, 14u}) {
      for (double ratio : {0.1, 0.25, 0.4, 0.6, 0.9}) {
        const std::size_t target = target_count(gh * gw, ratio);
        if (target == 0) continue;
        const std::size_t min_block = std::min<std::size_t>(4, target);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          const MaskSet m = mask_blockwise(gh, gw, ratio, min_block, seed);
          ASSERT_EQ(m.positions.size(), target) << gh << "x" << gw << " @" << ratio;
          expect_well_formed(m);
          EXPECT_TRUE(has_full_rectangle(m, gh, gw, min_block))
              << gh << "x" << gw << " @" << ratio << " seed " << seed;
        }
      }
    }
  }
}

TEST(MaskBlockwise, Deterministic) {
  EXPECT_EQ(mask_blockwise(14, 14, 0.4, 16, 5).positions,
            mask_blockwise(14, 14, 0.4, 16, 5).positions);
}

TEST(MaskBlockwise, DistinctSeedsGiveDistinctMasks) {
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    seen.insert(mask_blockwise(14, 14, 0.4, 16, seed).positions);
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(DefaultMinBlock, Values) {
  EXPECT_EQ(default_min_block(14, 14, 0.4), 16u);
  EXPECT_EQ(default_min_block(4, 4, 0.4), 4u);
  EXPECT_EQ(default_min_block(2, 2, 0.5), 2u);
}

TEST(MaskSet, FlagsAndContains) {
  MaskSet m{{1, 3}, 5};
  EXPECT_EQ(m.as_flags(), (std::vector<bool>{false, true, false, true, false}));
  EXPECT_TRUE(m.contains(3));
  EXPECT_FALSE(m.contains(2));
}

}  // namespace
}  // namespace mwvqa::masking
