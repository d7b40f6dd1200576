#include "tlmg/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "tlmg/error.hpp"

namespace tlmg::nn {

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
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

// Gradient buffer of parent i, or nullptr when that parent does not need one.
double* parent_grad(TensorImpl& node, std::size_t i) {
  auto& p = node.parents[i];
  return p->requires_grad ? p->grad.data() : nullptr;
}

const double* parent_data(TensorImpl& node, std::size_t i) {
  return node.parents[i]->data.data();
}

// C[n, m] += A[n, k] * B[k, m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[n, k] += G[n, m] * B[k, m]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += gi[j] * bp[j];
      c[i * k + p] += s;
    }
  }
}

// C[k, m] += A[n, k]^T * G[n, m]
void gemm_tn(const double* a, const double* g, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += av * gi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](TensorImpl& node) {
    double* gx = parent_grad(node, 0);
    const double* xv = parent_data(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      gx[i] += node.grad[i] * deriv(xv[i], node.data[i]);
    }
  });
}

Tensor gather(const Tensor& table, std::span<const std::size_t> ids,
              const char* op) {
  require_matrix(table, op);
  const std::size_t rows = table.rows();
  const std::size_t d = table.cols();
  if (ids.empty()) throw DimensionError(std::string(op) + ": empty index list");
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  auto td = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows) {
      throw DimensionError(std::string(op) + ": index " +
                           std::to_string(idx[i]) + " outside " +
                           std::to_string(rows) + " rows");
    }
    std::copy_n(td.data() + idx[i] * d, d, out.data() + i * d);
  }
  const std::size_t count = idx.size();
  return make_result({count, d}, std::move(out), {table},
                     [idx = std::move(idx), d](TensorImpl& node) {
                       double* gt = parent_grad(node, 0);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         double* dst = gt + idx[i] * d;
                         const double* src = node.grad.data() + i * d;
                         for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(n * m, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), n, k, m);
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](TensorImpl& node) {
    if (double* ga = parent_grad(node, 0)) {
      gemm_nt(node.grad.data(), parent_data(node, 1), ga, n, k, m);
    }
    if (double* gb = parent_grad(node, 1)) {
      gemm_tn(parent_data(node, 0), node.grad.data(), gb, n, k, m);
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> out(n * m);
  auto ad = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = ad[i * m + j];
  }
  return make_result({m, n}, std::move(out), {a}, [n, m](TensorImpl& node) {
    double* ga = parent_grad(node, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += node.grad[j * n + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& node) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(node, p)) {
        for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& node) {
    if (double* g = parent_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    }
    if (double* g = parent_grad(node, 1)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] -= node.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& node) {
    const double* av = parent_data(node, 0);
    const double* bv = parent_data(node, 1);
    if (double* g = parent_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * bv[i];
    }
    if (double* g = parent_grad(node, 1)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; },
               [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_row(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.rows(), m = x.cols();
  if (bias.size() != m) {
    throw DimensionError("add_row: bias of shape " +
                         shape_string(bias.shape()) + " for rows of width " +
                         std::to_string(m));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bd = bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bd[j];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [n, m](TensorImpl& node) {
    if (double* g = parent_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
    }
    if (double* g = parent_grad(node, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) g[j] += node.grad[i * m + j];
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(c * (v + k * v * v * v));
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
      });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) {
                 return (v >= lo && v <= hi) ? 1.0 : 0.0;
               });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " invalid for shape " + shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, xd[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(xd[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
    }
  }
  return make_result(s, std::move(out), {x}, [outer, inner, len](TensorImpl& node) {
    double* gx = parent_grad(node, 0);
    const auto& y = node.data;
    const auto& g = node.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          dot += g[base + j * inner] * y[base + j * inner];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = base + j * inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require_matrix(x, "log_softmax");
  const std::size_t n = x.rows(), m = x.cols();
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = xd.data() + i * m;
    const double mx = *std::max_element(xi, xi + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(xi[j] - mx);
    const double lz = std::log(z);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xi[j] - mx - lz;
  }
  return make_result(x.shape(), std::move(out), {x}, [n, m](TensorImpl& node) {
    double* gx = parent_grad(node, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < m; ++j) gs += node.grad[i * m + j];
      for (std::size_t j = 0; j < m; ++j) {
        gx[i * m + j] += node.grad[i * m + j] - std::exp(node.data[i * m + j]) * gs;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const std::size_t n = x.rows(), m = x.cols();
  if (gamma.size() != m || beta.size() != m) {
    throw DimensionError("layer_norm: affine parameters must have length " +
                         std::to_string(m));
  }
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(n);
  std::vector<double> out(x.size());
  auto xd = x.data(), gd = gamma.data(), bd = beta.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = xd.data() + i * m;
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += xi[j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(m);
    const double r = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = r;
    for (std::size_t j = 0; j < m; ++j) {
      const double h = (xi[j] - mu) * r;
      (*xhat)[i * m + j] = h;
      out[i * m + j] = gd[j] * h + bd[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [n, m, xhat, rstd](TensorImpl& node) {
    double* gx = parent_grad(node, 0);
    double* gg = parent_grad(node, 1);
    double* gb = parent_grad(node, 2);
    const double* gamma_v = parent_data(node, 1);
    std::vector<double> dh(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double* g = node.grad.data() + i * m;
      const double* h = xhat->data() + i * m;
      double mean_dh = 0.0, mean_dh_h = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (gg) gg[j] += g[j] * h[j];
        if (gb) gb[j] += g[j];
        dh[j] = g[j] * gamma_v[j];
        mean_dh += dh[j];
        mean_dh_h += dh[j] * h[j];
      }
      if (!gx) continue;
      mean_dh /= static_cast<double>(m);
      mean_dh_h /= static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) {
        gx[i * m + j] += (*rstd)[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  return gather(table, ids, "embedding");
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  return gather(x, rows, "gather_rows");
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "pick");
  const std::size_t n = x.rows(), m = x.cols();
  if (index.size() != n) {
    throw DimensionError("pick: " + std::to_string(index.size()) +
                         " indices for " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (idx[i] >= m) throw DimensionError("pick: column index out of range");
    out[i] = x.data()[i * m + idx[i]];
  }
  return make_result({n}, std::move(out), {x}, [idx = std::move(idx), m](TensorImpl& node) {
    double* gx = parent_grad(node, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * m + idx[i]] += node.grad[i];
  });
}

Tensor hcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("hcat: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) {
      throw DimensionError("hcat: row counts differ, " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(pd.data() + i * widths[k], widths[k],
                  out.data() + i * total + offset);
    }
    offset += widths[k];
  }
  return make_result({n, total}, std::move(out), parts,
                     [n, total, widths = std::move(widths)](TensorImpl& node) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = parent_grad(node, k)) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < widths[k]; ++j) {
            g[i * widths[k] + j] += node.grad[i * total + off + j];
          }
        }
      }
      off += widths[k];
    }
  });
}

Tensor vcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("vcat: no inputs");
  const std::size_t m = parts[0].cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.cols() != m) {
      throw DimensionError("vcat: column counts differ, " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    n += p.rows();
  }
  std::vector<double> out;
  out.reserve(n * m);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({n, m}, std::move(out), parts, [](TensorImpl& node) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t len = node.parents[k]->data.size();
      if (double* g = parent_grad(node, k)) {
        for (std::size_t i = 0; i < len; ++i) g[i] += node.grad[off + i];
      }
      off += len;
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.rows(), m = x.cols();
  if (begin >= end || end > m) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(n * w);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(xd.data() + i * m + begin, w, out.data() + i * w);
  }
  return make_result({n, w}, std::move(out), {x}, [n, m, w, begin](TensorImpl& node) {
    double* g = parent_grad(node, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < w; ++j) g[i * m + begin + j] += node.grad[i * w + j];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.rows(), m = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " +
                         shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * m),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * m));
  return make_result({end - begin, m}, std::move(out), {x}, [begin, m](TensorImpl& node) {
    double* g = parent_grad(node, 0) + begin * m;
    for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
  });
}

Tensor override_rows(const Tensor& base, std::span<const std::size_t> rows,
                     const std::vector<Tensor>& replacements) {
  require_matrix(base, "override_rows");
  const std::size_t n = base.rows(), m = base.cols();
  if (rows.size() != replacements.size()) {
    throw DimensionError("override_rows: row/replacement count mismatch");
  }
  std::vector<double> out(base.data().begin(), base.data().end());
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n || replacements[k].size() != m) {
      throw DimensionError("override_rows: replacement does not fit row " +
                           std::to_string(idx[k]));
    }
    std::copy_n(replacements[k].data().data(), m, out.data() + idx[k] * m);
  }
  return make_result({n, m}, std::move(out), replacements,
                     [idx = std::move(idx), m](TensorImpl& node) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (double* g = parent_grad(node, k)) {
        for (std::size_t j = 0; j < m; ++j) g[j] += node.grad[idx[k] * m + j];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](TensorImpl& node) {
    double* g = parent_grad(node, 0);
    const std::size_t len = node.parents[0]->data.size();
    for (std::size_t i = 0; i < len; ++i) g[i] += node.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw DomainError("dropout rate must be below 1");
  const double keep = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : keep;
    out[i] = xd[i] * (*mask)[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [mask](TensorImpl& node) {
    double* g = parent_grad(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i] * (*mask)[i];
  });
}

Tensor spmm(const SparseMatrix& a, const Tensor& x) {
  const std::size_t n = x.rows(), m = x.cols();
  if (a.size() != n) {
    throw DimensionError("spmm: " + std::to_string(a.size()) + "-node operator on " +
                         shape_string(x.shape()));
  }
  std::vector<double> out(n * m);
  a.multiply(x.data(), m, out);
  // The operator is captured by pointer; callers keep it alive for the
  // lifetime of the recorded graph.
  const SparseMatrix* op = &a;
  return make_result({n, m}, std::move(out), {x}, [op, m](TensorImpl& node) {
    double* g = parent_grad(node, 0);
    op->multiply_transposed_add(node.grad, m,
                                std::span<double>(g, node.grad.size()));
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& key_bias) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: query/key width mismatch " +
                         shape_string(q.shape()) + " vs " +
                         shape_string(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: key/value length mismatch " +
                         shape_string(k.shape()) + " vs " +
                         shape_string(v.shape()));
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = scale(matmul(q, transpose(k)), inv);
  if (key_bias.defined()) scores = add(scores, key_bias);
  return matmul(softmax(scores, 1), v);
}

}  // namespace tlmg::nn
