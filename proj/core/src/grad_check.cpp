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

#include "mwvqa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mwvqa/errors.hpp"

namespace mwvqa {

namespace {

double evaluate(const std::function<Tensor()>& loss_fn) {
  const Tensor loss = loss_fn();
  if (loss.numel() != 1) {
    throw ContractError("grad_check: loss must be scalar, got shape " +
                        shape_string(loss.shape()));
  }
  return loss.item();
}

}  // namespace

GradReport grad_check(const std::function<Tensor()>& loss_fn,
                      std::vector<Tensor> params, double h, double tol) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");

  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor loss = loss_fn();
  if (loss.numel() != 1) {
    throw ContractError("grad_check: loss must be scalar, got shape " +
                        shape_string(loss.shape()));
  }
  loss.backward();

  GradReport report;
  report.tolerance = tol;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad_values();
    auto values = p.mutable_data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate(loss_fn);
      values[i] = saved - h;
      const double minus = evaluate(loss_fn);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      worst = std::max(worst, std::isnan(rel) ? INFINITY : rel);
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  report.pass = report.worst <= tol;
  return report;
}

std::string describe(const GradReport& report) {
  std::ostringstream out;
  out << (report.pass ? "pass" : "FAIL") << " worst=" << report.worst
      << " tol=" << report.tolerance << " params=" << report.max_rel_error.size();
  return out.str();
}

}  // namespace mwvqa
