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

#ifndef MWVQA_GRAD_CHECK_HPP_
#define MWVQA_GRAD_CHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "mwvqa/tensor.hpp"

namespace mwvqa {

struct GradReport {
  std::vector<double> max_rel_error;  // one entry per checked parameter
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Compares reverse-mode gradients of `loss_fn` against central finite
// differences (f(p+h) - f(p-h)) / 2h, one coordinate at a time. Relative
// error is |a - n| / max(|a|, |n|, 1e-8). loss_fn must rebuild its graph
// on every call and be deterministic. Parameter gradients are zeroed on
// entry and hold the analytic gradient on return.
GradReport grad_check(const std::function<Tensor()>& loss_fn,
                      std::vector<Tensor> params, double h = 1e-5,
                      double tol = 1e-4);

std::string describe(const GradReport& report);

}  // namespace mwvqa

#endif  // MWVQA_GRAD_CHECK_HPP_
