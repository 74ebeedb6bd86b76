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

#include "mwvqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mwvqa/errors.hpp"
#include "mwvqa/rng.hpp"

namespace mwvqa {

namespace {

using detail::TensorNode;

// Parent gradient buffer, or nullptr when that parent is not tracked.
std::vector<double>* parent_grad(TensorNode& self, std::size_t i) {
  TensorNode& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// rows x width view of a tensor over its last axis.
struct RowView {
  std::size_t rows;
  std::size_t width;
};

RowView last_axis_view(const Tensor& t, const char* op) {
  if (t.rank() == 0) {
    throw DimensionError(std::string(op) + ": needs rank >= 1");
  }
  const std::size_t width = t.shape().back();
  return {t.numel() / width, width};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b},
                             [m, k, n](TensorNode& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    if (auto* ga = parent_grad(self, 0)) {
      // dA = dC . B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (auto* gb = parent_grad(self, 1)) {
      // dB = A^T . dC
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double a_ip = av[i * k + p];
          double* grow = gb->data() + p * n;
          for (std::size_t j = 0; j < n; ++j) grow[j] += a_ip * g[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto ad = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a},
                             [m, n](TensorNode& self) {
    auto* ga = parent_grad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](TensorNode& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* gp = parent_grad(self, p))
        for (std::size_t i = 0; i < gp->size(); ++i) (*gp)[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](TensorNode& self) {
    if (auto* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i];
    if (auto* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [](TensorNode& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    if (auto* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i] * bv[i];
    if (auto* gb = parent_grad(self, 1))
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [factor](TensorNode& self) {
    if (auto* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i] * factor;
  });
}

Tensor add_rowwise(const Tensor& a, const Tensor& row) {
  require_rank(a, 2, "add_rowwise");
  require_rank(row, 1, "add_rowwise");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (row.dim(0) != n) {
    throw DimensionError("add_rowwise: row " + shape_string(row.shape()) +
                         " does not match " + shape_string(a.shape()));
  }
  const auto ad = a.data();
  const auto rd = row.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = ad[i * n + j] + rd[j];
  return Tensor::make_result({m, n}, std::move(out), {a, row},
                             [m, n](TensorNode& self) {
    if (auto* ga = parent_grad(self, 0))
      for (std::size_t i = 0; i < m * n; ++i) (*ga)[i] += self.grad[i];
    if (auto* gr = parent_grad(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gr)[j] += self.grad[i * n + j];
  });
}

Tensor gelu(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * normal_cdf(xd[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& xv = self.parents[0]->data;
    for (std::size_t i = 0; i < gx->size(); ++i) {
      const double v = xv[i];
      (*gx)[i] += self.grad[i] * (normal_cdf(v) + v * normal_pdf(v));
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " invalid for shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xd[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xd[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xd[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  return Tensor::make_result(s, std::move(out), {x},
                             [outer, inner, len](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          dot += y[idx] * g[idx];
        }
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          (*gx)[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& key_valid) {
  require_rank(scores, 2, "masked_softmax");
  const std::size_t m = scores.dim(0), n = scores.dim(1);
  if (key_valid.size() != n) {
    throw DimensionError("masked_softmax: mask length " +
                         std::to_string(key_valid.size()) + " vs " +
                         shape_string(scores.shape()));
  }
  if (std::none_of(key_valid.begin(), key_valid.end(), [](bool v) { return v; })) {
    throw ContractError("masked_softmax: every key is masked");
  }
  const auto sd = scores.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j)
      if (key_valid[j]) mx = std::max(mx, sd[i * n + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!key_valid[j]) continue;
      const double e = std::exp(sd[i * n + j] - mx);
      out[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return Tensor::make_result({m, n}, std::move(out), {scores},
                             [m, n](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        (*gx)[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const RowView v = last_axis_view(x, "layer_norm");
  require_rank(gamma, 1, "layer_norm");
  require_rank(beta, 1, "layer_norm");
  if (gamma.dim(0) != v.width || beta.dim(0) != v.width) {
    throw DimensionError("layer_norm: feature size " + std::to_string(v.width) +
                         " vs gamma " + shape_string(gamma.shape()) +
                         ", beta " + shape_string(beta.shape()));
  }
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  const std::size_t d = v.width;
  std::vector<double> normalized(xd.size());
  std::vector<double> inv_std(v.rows);
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < v.rows; ++r) {
    const double* row = xd.data() + r * d;
    const bool constant =
        std::all_of(row, row + d, [&](double value) { return value == row[0]; });
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    if (!constant) {
      for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= static_cast<double>(d);
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = constant ? 0.0 : (row[j] - mu) * is;
      normalized[r * d + j] = xh;
      out[r * d + j] = gd[j] * xh + bd[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [v, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](TensorNode& self) {
    const std::size_t d = v.width;
    const auto& g = self.grad;
    const auto& gam = self.parents[1]->data;
    if (auto* gx = parent_grad(self, 0)) {
      std::vector<double> dxh(d);
      for (std::size_t r = 0; r < v.rows; ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dxh[j] = g[r * d + j] * gam[j];
          mean_d += dxh[j];
          mean_dx += dxh[j] * normalized[r * d + j];
        }
        mean_d /= static_cast<double>(d);
        mean_dx /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          (*gx)[r * d + j] +=
              inv_std[r] * (dxh[j] - mean_d - normalized[r * d + j] * mean_dx);
        }
      }
    }
    if (auto* gg = parent_grad(self, 1))
      for (std::size_t r = 0; r < v.rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*gg)[j] += g[r * d + j] * normalized[r * d + j];
    if (auto* gb = parent_grad(self, 2))
      for (std::size_t r = 0; r < v.rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*gb)[j] += g[r * d + j];
  });
}

Tensor l2_normalize(const Tensor& x) {
  const RowView v = last_axis_view(x, "l2_normalize");
  const auto xd = x.data();
  std::vector<double> out(xd.size(), 0.0);
  std::vector<double> norms(v.rows);
  for (std::size_t r = 0; r < v.rows; ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < v.width; ++j) ss += xd[r * v.width + j] * xd[r * v.width + j];
    const double n = std::sqrt(ss);
    norms[r] = n;
    if (n == 0.0) continue;
    for (std::size_t j = 0; j < v.width; ++j) out[r * v.width + j] = xd[r * v.width + j] / n;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [v, norms = std::move(norms)](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t r = 0; r < v.rows; ++r) {
      if (norms[r] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < v.width; ++j) dot += y[r * v.width + j] * g[r * v.width + j];
      for (std::size_t j = 0; j < v.width; ++j) {
        const std::size_t i = r * v.width + j;
        (*gx)[i] += (g[i] - y[i] * dot) / norms[r];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({}, {total}, {x}, [](TensorNode& self) {
    if (auto* gx = parent_grad(self, 0))
      for (double& g : *gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_last(const Tensor& x) {
  const RowView v = last_axis_view(x, "sum_last");
  const auto xd = x.data();
  std::vector<double> out(v.rows, 0.0);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t j = 0; j < v.width; ++j) out[r] += xd[r * v.width + j];
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [v](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < v.rows; ++r)
      for (std::size_t j = 0; j < v.width; ++j) (*gx)[r * v.width + j] += self.grad[r];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "gather_rows");
  if (ids.empty()) throw ContractError("gather_rows: empty index list");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  const auto td = table.data();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw RangeError("gather_rows: index " + std::to_string(ids[i]) +
                       " out of range for " + std::to_string(rows) + " rows");
    }
    std::copy_n(td.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return Tensor::make_result({ids.size(), d}, std::move(out), {table},
                             [idx = std::move(idx), d](TensorNode& self) {
    auto* gt = parent_grad(self, 0);
    if (!gt) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) (*gt)[idx[i] * d + j] += self.grad[i * d + j];
  });
}

Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> ids,
                    std::size_t rows) {
  require_rank(src, 2, "scatter_rows");
  if (src.dim(0) != ids.size()) {
    throw DimensionError("scatter_rows: " + std::to_string(ids.size()) +
                         " indices for " + shape_string(src.shape()));
  }
  const std::size_t d = src.dim(1);
  std::vector<bool> seen(rows, false);
  const auto sd = src.data();
  std::vector<double> out(rows * d, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw RangeError("scatter_rows: index " + std::to_string(ids[i]) +
                       " out of range for " + std::to_string(rows) + " rows");
    }
    if (seen[ids[i]]) throw ContractError("scatter_rows: duplicate index");
    seen[ids[i]] = true;
    std::copy_n(sd.data() + i * d, d, out.data() + ids[i] * d);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return Tensor::make_result({rows, d}, std::move(out), {src},
                             [idx = std::move(idx), d](TensorNode& self) {
    auto* gs = parent_grad(self, 0);
    if (!gs) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) (*gs)[i * d + j] += self.grad[idx[i] * d + j];
  });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> cols) {
  require_rank(x, 2, "gather_cols");
  if (cols.empty()) throw ContractError("gather_cols: empty index list");
  const std::size_t m = x.dim(0), n = x.dim(1), k = cols.size();
  const auto xd = x.data();
  std::vector<double> out(m * k);
  for (std::size_t j = 0; j < k; ++j) {
    if (cols[j] >= n) {
      throw RangeError("gather_cols: column " + std::to_string(cols[j]) +
                       " out of range for " + std::to_string(n) + " columns");
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xd[i * n + cols[j]];
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return Tensor::make_result({m, k}, std::move(out), {x},
                             [idx = std::move(idx), m, n](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const std::size_t k = idx.size();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j) (*gx)[i * n + idx[j]] += self.grad[i * k + j];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  const auto xd = x.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xd.data() + i * n + begin, w, out.data() + i * w);
  return Tensor::make_result({m, w}, std::move(out), {x},
                             [m, n, w, begin](TensorNode& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) (*gx)[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != m) {
      throw DimensionError("concat_cols: row counts differ, " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pd.data() + i * widths[k], widths[k], out.data() + i * total + offset);
    offset += widths[k];
  }
  return Tensor::make_result({m, total}, std::move(out), parts,
                             [m, total, widths](TensorNode& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (auto* gp = parent_grad(self, k)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            (*gp)[i * widths[k] + j] += self.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: nothing to concatenate");
  const std::size_t d = parts[0].dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != d) {
      throw DimensionError("concat_rows: widths differ, " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Tensor::make_result({rows, d}, std::move(out), parts,
                             [](TensorNode& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t len = self.parents[k]->data.size();
      if (auto* gp = parent_grad(self, k))
        for (std::size_t i = 0; i < len; ++i) (*gp)[i] += self.grad[off + i];
      off += len;
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t m = logits.dim(0), c = logits.dim(1);
  if (targets.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + shape_string(logits.shape()));
  }
  const auto ld = logits.data();
  std::vector<double> probs(m * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= c) {
      throw RangeError("cross_entropy: target " + std::to_string(targets[i]) +
                       " out of range for " + std::to_string(c) + " classes");
    }
    const double* row = ld.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      total += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= total;
    loss += std::log(total) + mx - row[targets[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [m, c, probs = std::move(probs), tgt = std::move(tgt)](TensorNode& self) {
    auto* gl = parent_grad(self, 0);
    if (!gl) return;
    const double g = self.grad[0] / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double onehot = (j == tgt[i]) ? 1.0 : 0.0;
        (*gl)[i * c + j] += g * (probs[i * c + j] - onehot);
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ContractError("dropout: rate must lie in [0, 1)");
  }
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = (rng.uniform() < rate) ? 0.0 : keep_scale;
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [mask = std::move(mask)](TensorNode& self) {
    if (auto* gx = parent_grad(self, 0))
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i] * mask[i];
  });
}

Tensor stop_gradient(const Tensor& x) { return x.detach(); }

Tensor straight_through(const Tensor& gradient_target,
                        const Tensor& forward_value) {
  require_same_shape(gradient_target, forward_value, "straight_through");
  std::vector<double> out(forward_value.data().begin(), forward_value.data().end());
  return Tensor::make_result(forward_value.shape(), std::move(out),
                             {gradient_target}, [](TensorNode& self) {
    if (auto* gt = parent_grad(self, 0))
      for (std::size_t i = 0; i < gt->size(); ++i) (*gt)[i] += self.grad[i];
  });
}

}  // namespace mwvqa
