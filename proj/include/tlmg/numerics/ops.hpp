#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/sparse.hpp"
#include "tlmg/numerics/tensor.hpp"

// Differentiable tensor operations. Matrix ops take rank-2 tensors; a rank-1
// tensor of length n is treated as a 1 x n row where noted.
namespace tlmg::nn {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// x[n, m] + bias[m] on every row.
Tensor add_row(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
// tanh approximation.
Tensor gelu(const Tensor& x);
Tensor log(const Tensor& x);
// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor clamp(const Tensor& x, double lo, double hi);

// Softmax over one axis of an arbitrary-rank tensor, max-shifted.
Tensor softmax(const Tensor& x, std::size_t axis);
// Log-softmax over the last axis of a matrix.
Tensor log_softmax(const Tensor& x);

// Row-wise layer normalisation with affine gamma/beta of length cols.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-12);

// table[V, d] rows selected by ids -> [ids.size(), d]
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
// x[n, m] -> [n] with x[i, index[i]]
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

Tensor hcat(const std::vector<Tensor>& parts);
Tensor vcat(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Copy of `base` (constant) with rows[i] replaced by the 1 x m tensor
// replacements[i]. Gradients flow only into the replacements.
Tensor override_rows(const Tensor& base, std::span<const std::size_t> rows,
                     const std::vector<Tensor>& replacements);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// a (constant sparse, n x n) times x[n, m].
Tensor spmm(const SparseMatrix& a, const Tensor& x);

/// softmax(Q K^T / sqrt(d_k)) V for one head. `key_bias`, when defined, is a
/// constant [queries, keys] additive mask (large negative entries hide keys).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Tensor& key_bias = Tensor());

}  // namespace tlmg::nn
