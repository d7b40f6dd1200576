#include "tlmg/numerics/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tlmg/error.hpp"

namespace tlmg::nn {

SparseMatrix::SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr,
                           std::vector<std::size_t> cols,
                           std::vector<double> values)
    : n_(n),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      values_(std::move(values)) {
  if (row_ptr_.size() != n_ + 1 || cols_.size() != values_.size() ||
      row_ptr_.back() != values_.size()) {
    throw DimensionError("inconsistent compressed-row arrays");
  }
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseMatrix::dense() const {
  std::vector<double> out(n_ * n_, 0.0);
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out[r * n_ + cols_[k]] = values_[k];
    }
  }
  return out;
}

bool SparseMatrix::is_symmetric() const {
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (at(cols_[k], r) != values_[k]) return false;
    }
  }
  return true;
}

void SparseMatrix::multiply(std::span<const double> x, std::size_t m,
                            std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < n_; ++r) {
    double* o = out.data() + r * m;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double w = values_[k];
      const double* xr = x.data() + cols_[k] * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += w * xr[j];
    }
  }
}

void SparseMatrix::multiply_transposed_add(std::span<const double> x,
                                           std::size_t m,
                                           std::span<double> out) const {
  for (std::size_t r = 0; r < n_; ++r) {
    const double* xr = x.data() + r * m;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double w = values_[k];
      double* o = out.data() + cols_[k] * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += w * xr[j];
    }
  }
}

SparseMatrix normalized_adjacency(std::size_t n,
                                  std::span<const WeightedEdge> edges) {
  std::vector<std::map<std::size_t, double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i][i] = 1.0;
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw DimensionError("edge endpoint outside node range");
    }
    if (e.u == e.v) continue;
    rows[e.u][e.v] += e.weight;
    rows[e.v][e.u] += e.weight;
  }
  std::vector<double> inv_sqrt_degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (const auto& [c, w] : rows[i]) d += w;
    inv_sqrt_degree[i] = 1.0 / std::sqrt(d);
  }
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> cols;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [c, w] : rows[i]) {
      cols.push_back(c);
      values.push_back(w * (inv_sqrt_degree[i] * inv_sqrt_degree[c]));
    }
    row_ptr.push_back(cols.size());
  }
  return SparseMatrix(n, std::move(row_ptr), std::move(cols),
                      std::move(values));
}

}  // namespace tlmg::nn
