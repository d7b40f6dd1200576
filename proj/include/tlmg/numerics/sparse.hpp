#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tlmg::nn {

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

/// Constant square sparse matrix in compressed-row form. Columns within each
/// row are sorted, which fixes the accumulation order of every product.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr,
               std::vector<std::size_t> cols, std::vector<double> values);

  std::size_t size() const { return n_; }
  std::size_t nnz() const { return values_.size(); }
  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_index() const { return cols_; }
  std::span<const double> values() const { return values_; }

  double at(std::size_t r, std::size_t c) const;
  std::vector<double> dense() const;
  bool is_symmetric() const;

  // out[n, m] = this * x[n, m]
  void multiply(std::span<const double> x, std::size_t m,
                std::span<double> out) const;
  // out[n, m] += this^T * x[n, m]
  void multiply_transposed_add(std::span<const double> x, std::size_t m,
                               std::span<double> out) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

/// D^{-1/2} (A + I) D^{-1/2} for an undirected weighted graph on n nodes.
/// Each edge is stored once; both directions are filled in. D is the degree
/// matrix of A + I.
SparseMatrix normalized_adjacency(std::size_t n,
                                  std::span<const WeightedEdge> edges);

}  // namespace tlmg::nn
