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

#ifndef MWVQA_VERIFICATION_HPP_
#define MWVQA_VERIFICATION_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mwvqa/grad_check.hpp"

namespace mwvqa::verification {

struct GradientCase {
  std::string name;
  std::function<GradReport(std::uint64_t seed, double h, double tol)> run;
};

// Finite-difference cases covering every differentiable op, the layer
// building blocks, the VQ-KD objective and a 2-layer multiway model.
const std::vector<GradientCase>& gradient_cases();

struct CaseResult {
  std::string name;
  std::uint64_t seed = 0;
  GradReport report;
};

struct SuiteOptions {
  std::size_t seeds = 20;
  std::uint64_t first_seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
};

// Runs every case for seeds first_seed .. first_seed + seeds - 1.
std::vector<CaseResult> run_gradient_suite(
    const SuiteOptions& options,
    const std::function<void(const CaseResult&)>& on_result = {});

}  // namespace mwvqa::verification

#endif  // MWVQA_VERIFICATION_HPP_
