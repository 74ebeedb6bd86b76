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

#include "mwvqa/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mwvqa/errors.hpp"
#include "mwvqa/rng.hpp"

namespace mwvqa::masking {

namespace {

void check_ratio(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw ContractError("mask ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
}

struct Rect {
  std::size_t top, left, h, w;
  std::size_t area() const { return h * w; }
};

// Draws a rectangle with area in [min_area, max_area] and log-uniform
// aspect, clipped to the grid.
Rect sample_rect(Rng& rng, std::size_t grid_h, std::size_t grid_w,
                 std::size_t min_area, std::size_t max_area) {
  const double area = rng.uniform(static_cast<double>(min_area),
                                  static_cast<double>(max_area));
  const double log_aspect = rng.uniform(std::log(kMinAspect), std::log(1.0 / kMinAspect));
  const double aspect = std::exp(log_aspect);
  auto clip = [](double v, std::size_t hi) {
    const auto r = static_cast<std::size_t>(std::llround(v));
    return std::clamp<std::size_t>(r, 1, hi);
  };
  Rect r;
  r.h = clip(std::sqrt(area * aspect), grid_h);
  r.w = clip(std::sqrt(area / aspect), grid_w);
  r.top = rng.uniform_index(grid_h - r.h + 1);
  r.left = rng.uniform_index(grid_w - r.w + 1);
  return r;
}

}  // namespace

bool MaskSet::contains(std::size_t pos) const {
  return std::binary_search(positions.begin(), positions.end(), pos);
}

std::vector<bool> MaskSet::as_flags() const {
  std::vector<bool> flags(total, false);
  for (std::size_t p : positions) flags[p] = true;
  return flags;
}

std::size_t target_count(std::size_t total, double ratio) {
  check_ratio(ratio);
  const double exact = static_cast<double>(total) * ratio;
  return std::min(total, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

MaskSet mask_text(std::size_t len, double ratio, std::uint64_t seed) {
  const std::size_t count = target_count(len, ratio);
  MaskSet mask;
  mask.total = len;
  if (count == 0) return mask;
  Rng rng(seed);
  std::vector<std::size_t> pool(len);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(len - i);
    std::swap(pool[i], pool[j]);
  }
  mask.positions.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(mask.positions.begin(), mask.positions.end());
  return mask;
}

std::size_t default_min_block(std::size_t grid_h, std::size_t grid_w, double ratio) {
  const std::size_t target = target_count(grid_h * grid_w, ratio);
  const std::size_t preferred = (grid_h >= 14 && grid_w >= 14) ? 16 : 4;
  return std::max<std::size_t>(1, std::min(preferred, target));
}

MaskSet mask_blockwise(std::size_t grid_h, std::size_t grid_w, double ratio,
                       std::size_t min_block, std::uint64_t seed) {
  if (grid_h == 0 || grid_w == 0) throw ContractError("mask_blockwise: empty grid");
  const std::size_t total = grid_h * grid_w;
  const std::size_t target = target_count(total, ratio);
  MaskSet mask;
  mask.total = total;
  if (target == 0) return mask;
  if (min_block == 0 || min_block > target) {
    throw ContractError("mask_blockwise: min_block " + std::to_string(min_block) +
                        " infeasible for target " + std::to_string(target) + " on " +
                        std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
  }

  Rng rng(seed);
  std::vector<bool> covered(total, false);
  std::size_t count = 0;
  std::vector<std::size_t> last_new;  // cells first covered by the newest rectangle

  auto apply = [&](const Rect& r) {
    last_new.clear();
    for (std::size_t y = r.top; y < r.top + r.h; ++y) {
      for (std::size_t x = r.left; x < r.left + r.w; ++x) {
        const std::size_t cell = y * grid_w + x;
        if (!covered[cell]) {
          covered[cell] = true;
          last_new.push_back(cell);
        }
      }
    }
    count += last_new.size();
  };

  // First rectangle: area within [min_block, target] so trimming never cuts
  // into it.
  {
    constexpr int kAttempts = 100;
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      const Rect r = sample_rect(rng, grid_h, grid_w, min_block, target);
      if (r.area() >= min_block && r.area() <= target) {
        apply(r);
        placed = true;
      }
    }
    if (!placed) {
      // Aspect constraint cannot be met; take the most square fitting shape.
      const auto skew = [](const Rect& r) {
        return static_cast<double>(std::max(r.h, r.w)) /
               static_cast<double>(std::min(r.h, r.w));
      };
      Rect best{0, 0, 0, 0};
      for (std::size_t h = 1; h <= grid_h; ++h) {
        for (std::size_t w = 1; w <= grid_w; ++w) {
          const Rect cand{0, 0, h, w};
          if (cand.area() < min_block || cand.area() > target) continue;
          if (best.h == 0 || skew(cand) < skew(best) ||
              (skew(cand) == skew(best) && cand.area() < best.area())) {
            best = cand;
          }
        }
      }
      if (best.h == 0) {
        throw ContractError("mask_blockwise: no rectangle of area >= " +
                            std::to_string(min_block) + " fits the grid");
      }
      best.top = rng.uniform_index(grid_h - best.h + 1);
      best.left = rng.uniform_index(grid_w - best.w + 1);
      apply(best);
    }
  }

  constexpr std::size_t kMaxRectangles = 100000;
  std::size_t drawn = 0;
  while (count < target) {
    if (++drawn > kMaxRectangles) {
      throw NumericError("mask_blockwise: failed to reach target coverage");
    }
    const std::size_t remaining = target - count;
    const Rect r = sample_rect(rng, grid_h, grid_w, min_block,
                               std::max(min_block, remaining));
    if (r.area() < min_block) continue;
    apply(r);
  }

  if (count > target) {
    std::sort(last_new.begin(), last_new.end());
    std::size_t excess = count - target;
    for (auto it = last_new.rbegin(); it != last_new.rend() && excess > 0; ++it, --excess) {
      covered[*it] = false;
    }
  }

  for (std::size_t cell = 0; cell < total; ++cell) {
    if (covered[cell]) mask.positions.push_back(cell);
  }
  return mask;
}

}  // namespace mwvqa::masking
