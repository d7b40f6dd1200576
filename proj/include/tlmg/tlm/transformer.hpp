#pragma once

#include <cstddef>
#include <string>

#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/tensor.hpp"

namespace tlmg::tlm {

/// Post-LN self-attention block: multi-head attention, residual, layer norm,
/// GELU feed-forward, residual, layer norm.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  // Registers `<prefix>.*` parameters in `store` with N(0, 0.02) weights.
  TransformerBlock(nn::ParameterStore& store, const std::string& prefix,
                   std::size_t dim, std::size_t heads, std::size_t ff_dim,
                   Rng& rng);

  // x: [len, dim]. Dropout is applied only when `rng` is given. `key_bias`
  // is passed to every head's attention.
  nn::Tensor forward(const nn::Tensor& x, double dropout, Rng* rng,
                     const nn::Tensor& key_bias = nn::Tensor()) const;

  std::size_t dim() const { return dim_; }
  std::size_t heads() const { return heads_; }

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 0;
  nn::Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  nn::Tensor ln1_g_, ln1_b_;
  nn::Tensor w1_, b1_, w2_, b2_;
  nn::Tensor ln2_g_, ln2_b_;
};

// N(0, stddev) matrix.
nn::Tensor normal_init(nn::Shape shape, double stddev, Rng& rng);

}  // namespace tlmg::tlm
