#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gpio/errors.hpp"
#include "gpio/tensor.hpp"

namespace gpio {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

detail::Node& parent(detail::Node& n, std::size_t i) { return *n.parents[i]; }

// Eigen picks between packet and scalar code per coefficient from the runtime
// alignment of its operands. std::vector storage is only 16-byte aligned, so
// products go through Eigen-owned copies to keep results bit-identical
// across runs.
RowMat aligned_copy(const double* p, std::size_t r, std::size_t c) { return MapC(p, r, c); }

void accumulate_into(double* dst, const RowMat& src) {
  const auto n = static_cast<std::size_t>(src.size());
  const double* s = src.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += s[i];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  RowMat prod(m, n);
  prod.noalias() = aligned_copy(a.data().data(), m, k) * aligned_copy(b.data().data(), k, n);
  std::vector<double> out(prod.data(), prod.data() + m * n);
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](detail::Node& self) {
    const RowMat g = aligned_copy(self.grad.data(), m, n);
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      RowMat ga(m, k);
      ga.noalias() = g * aligned_copy(pb.value.data(), k, n).transpose();
      accumulate_into(pa.ensure_grad().data(), ga);
    }
    if (pb.requires_grad) {
      RowMat gb(k, n);
      gb.noalias() = aligned_copy(pa.value.data(), m, k).transpose() * g;
      accumulate_into(pb.ensure_grad().data(), gb);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [](detail::Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (parent(self, p).requires_grad) parent(self, p).accumulate(self.grad);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    auto& pb = parent(self, 1);
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result(a.shape(), std::move(out), "scale", {a}, [s](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_row_broadcast(const Tensor& a, const Tensor& bias) {
  require_matrix(a, "add_row_broadcast");
  const auto m = a.rows(), n = a.cols();
  if (bias.numel() != n) {
    throw ShapeError("add_row_broadcast: bias " + shape_string(bias.shape()) + " does not match " +
                     shape_string(a.shape()));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  auto b = bias.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += b[c];
  return make_result(a.shape(), std::move(out), "add_row_broadcast", {a, bias}, [m, n](detail::Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    auto& pb = parent(self, 1);
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  Map(out.data(), n, m) = MapC(a.data().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), "transpose", {a}, [m, n](detail::Node& self) {
    Map(parent(self, 0).ensure_grad().data(), m, n) += MapC(self.grad.data(), n, m).transpose();
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row counts differ " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(src.begin() + r * widths[k], widths[k], out.begin() + r * total + off);
    off += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({m, total}, std::move(out), "concat_cols", std::move(inputs),
                     [m, total, widths](detail::Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto& p = parent(self, k);
                         if (p.requires_grad) {
                           auto& g = p.ensure_grad();
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t c = 0; c < widths[k]; ++c)
                               g[r * widths[k] + c] += self.grad[r * total + off + c];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(parts);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto n = parts[0].cols();
  std::vector<std::size_t> heights;
  std::vector<double> out;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column counts differ " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    heights.push_back(p.rows());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const auto m = out.size() / std::max<std::size_t>(n, 1);
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({n ? m : 0, n}, std::move(out), "concat_rows", std::move(inputs),
                     [n, heights](detail::Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < heights.size(); ++k) {
                         auto& p = parent(self, k);
                         const auto len = heights[k] * n;
                         if (p.requires_grad) p.accumulate(std::span<const double>(self.grad).subspan(off, len));
                         off += len;
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_rows");
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_string(a.shape()));
  }
  const auto n = a.cols();
  std::vector<double> out(a.data().begin() + begin * n, a.data().begin() + end * n);
  return make_result({end - begin, n}, std::move(out), "slice_rows", {a}, [begin, n](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_string(a.shape()));
  }
  const auto m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(m * w);
  auto src = a.data();
  for (std::size_t r = 0; r < m; ++r) std::copy_n(src.begin() + r * n + begin, w, out.begin() + r * w);
  return make_result({m, w}, std::move(out), "slice_cols", {a}, [m, n, w, begin](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < w; ++c) g[r * n + begin + c] += self.grad[r * w + c];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  require_matrix(a, "gather_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(index.size() * n);
  auto src = a.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= m) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                       shape_string(a.shape()));
    }
    std::copy_n(src.begin() + index[i] * n, n, out.begin() + i * n);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({idx.size(), n}, std::move(out), "gather_rows", {a}, [idx, n](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < n; ++c) g[idx[i] * n + c] += self.grad[i * n + c];
  });
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  require_matrix(a, "repeat_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out;
  out.reserve(times * m * n);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), a.data().begin(), a.data().end());
  return make_result({times * m, n}, std::move(out), "repeat_rows", {a}, [times, m, n](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[t * m * n + i];
  });
}

Tensor pick_per_row(const Tensor& a, std::span<const std::size_t> index) {
  require_matrix(a, "pick_per_row");
  const auto m = a.rows(), n = a.cols();
  if (index.size() != m) {
    throw ShapeError("pick_per_row: " + std::to_string(index.size()) + " indices for " + shape_string(a.shape()));
  }
  std::vector<double> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] >= n) throw ShapeError("pick_per_row: column index " + std::to_string(index[r]) + " out of range");
    out[r] = a.data()[r * n + index[r]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({m, 1}, std::move(out), "pick_per_row", {a}, [idx, n](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) g[r * n + idx[r]] += self.grad[r];
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_matrix(a, "row_dot");
  require_same_shape(a, b, "row_dot");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  auto x = a.data(), y = b.data();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r] += x[r * n + c] * y[r * n + c];
  return make_result({m, 1}, std::move(out), "row_dot", {a, b}, [m, n](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[r] * pb.value[r * n + c];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[r] * pa.value[r * n + c];
    }
  });
}

namespace {

// Shared backward for (masked) softmax: dx = y * (g - <g, y>) per row.
void softmax_backward(detail::Node& self, std::size_t m, std::size_t n) {
  auto& g = parent(self, 0).ensure_grad();
  for (std::size_t r = 0; r < m; ++r) {
    const double* y = self.value.data() + r * n;
    const double* gy = self.grad.data() + r * n;
    double dot = 0.0;
    for (std::size_t c = 0; c < n; ++c) dot += gy[c] * y[c];
    for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (gy[c] - dot);
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += (out[r * n + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= total;
  }
  return make_result(a.shape(), std::move(out), "softmax_rows", {a},
                     [m, n](detail::Node& self) { softmax_backward(self, m, n); });
}

Tensor masked_softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed) {
  require_matrix(a, "masked_softmax_rows");
  const auto m = a.rows(), n = a.cols();
  if (allowed.size() != m * n) {
    throw ShapeError("masked_softmax_rows: mask has " + std::to_string(allowed.size()) + " entries for " +
                     shape_string(a.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    const std::uint8_t* ok = allowed.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c)
      if (ok[c]) mx = std::max(mx, row[c]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ShapeError("masked_softmax_rows: row " + std::to_string(r) + " has no allowed entries");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      if (ok[c]) total += (out[r * n + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= total;
  }
  // Masked outputs are exactly zero so the shared softmax backward gives them zero gradient.
  return make_result(a.shape(), std::move(out), "masked_softmax_rows", {a},
                     [m, n](detail::Node& self) { softmax_backward(self, m, n); });
}

Tensor log_softmax_rows(const Tensor& a) {
  require_matrix(a, "log_softmax_rows");
  const auto m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) total += std::exp(row[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] - lse;
  }
  return make_result(a.shape(), std::move(out), "log_softmax_rows", {a}, [m, n](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < n; ++c) gs += self.grad[r * n + c];
      for (std::size_t c = 0; c < n; ++c)
        g[r * n + c] += self.grad[r * n + c] - std::exp(self.value[r * n + c]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(a, "layer_norm");
  const auto m = a.rows(), n = a.cols();
  if (n == 0) throw ShapeError("layer_norm: zero-width input");
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" + shape_string(bias.shape()) +
                     " do not match " + shape_string(a.shape()));
  }
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  auto x = a.data(), gm = gain.data(), bt = bias.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += row[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (row[c] - mu) * inv_std[r];
      out[r * n + c] = xhat[r * n + c] * gm[c] + bt[c];
    }
  }
  return make_result(a.shape(), std::move(out), "layer_norm", {a, gain, bias},
                     [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
                       auto& px = parent(self, 0);
                       auto& pg = parent(self, 1);
                       auto& pb = parent(self, 2);
                       if (pg.requires_grad) {
                         auto& gg = pg.ensure_grad();
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t c = 0; c < n; ++c) gg[c] += self.grad[r * n + c] * xhat[r * n + c];
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.ensure_grad();
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t c = 0; c < n; ++c) gb[c] += self.grad[r * n + c];
                       }
                       if (px.requires_grad) {
                         auto& gx = px.ensure_grad();
                         const double inv_n = 1.0 / static_cast<double>(n);
                         for (std::size_t r = 0; r < m; ++r) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t c = 0; c < n; ++c) {
                             const double d = self.grad[r * n + c] * pg.value[c];
                             s1 += d;
                             s2 += d * xhat[r * n + c];
                           }
                           for (std::size_t c = 0; c < n; ++c) {
                             const double d = self.grad[r * n + c] * pg.value[c];
                             gx[r * n + c] += inv_std[r] * (d - inv_n * s1 - xhat[r * n + c] * inv_n * s2);
                           }
                         }
                       }
                     });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
  return make_result(a.shape(), std::move(out), "gelu", {a}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    auto& g = p.ensure_grad();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = p.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      g[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Branches keep exp() from overflowing for large |x|.
    out[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  return make_result(a.shape(), std::move(out), "sigmoid", {a}, [](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(x[i] > 0.0)) throw ShapeError("log: non-positive input " + std::to_string(x[i]));
    out[i] = std::log(x[i]);
  }
  return make_result(a.shape(), std::move(out), "log", {a}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / p.value[i];
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x[i], lo, hi);
  return make_result(a.shape(), std::move(out), "clamp", {a}, [lo, hi](detail::Node& self) {
    auto& p = parent(self, 0);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] >= lo && p.value[i] <= hi) g[i] += self.grad[i];
  });
}

Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw ShapeError("dropout: probability must lie in [0,1)");
  if (p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(a.numel());
  for (auto& v : mask) v = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return make_result(a.shape(), std::move(out), "dropout", {a}, [mask = std::move(mask)](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({}, {total}, "sum", {a}, [](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.numel());
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({}, {total * inv}, "mean", {a}, [inv](detail::Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

}  // namespace gpio
