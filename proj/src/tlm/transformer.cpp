#include "tlmg/tlm/transformer.hpp"

#include <cmath>
#include <vector>

#include "tlmg/error.hpp"
#include "tlmg/numerics/ops.hpp"

namespace tlmg::tlm {

using nn::Tensor;

Tensor normal_init(nn::Shape shape, double stddev, Rng& rng) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor::from(std::move(shape), std::move(v));
}

TransformerBlock::TransformerBlock(nn::ParameterStore& store,
                                   const std::string& prefix, std::size_t dim,
                                   std::size_t heads, std::size_t ff_dim,
                                   Rng& rng)
    : dim_(dim), heads_(heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("transformer: dim " + std::to_string(dim) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  constexpr double kStd = 0.02;
  auto w = [&](const std::string& name, std::size_t r, std::size_t c) {
    return store.add(prefix + "." + name, normal_init({r, c}, kStd, rng));
  };
  auto z = [&](const std::string& name, std::size_t n) {
    return store.add(prefix + "." + name, Tensor::zeros({n}));
  };
  auto one = [&](const std::string& name, std::size_t n) {
    return store.add(prefix + "." + name, Tensor::full({n}, 1.0));
  };
  wq_ = w("wq", dim, dim);
  bq_ = z("bq", dim);
  wk_ = w("wk", dim, dim);
  bk_ = z("bk", dim);
  wv_ = w("wv", dim, dim);
  bv_ = z("bv", dim);
  wo_ = w("wo", dim, dim);
  bo_ = z("bo", dim);
  ln1_g_ = one("ln1.gamma", dim);
  ln1_b_ = z("ln1.beta", dim);
  w1_ = w("ff1", dim, ff_dim);
  b1_ = z("ff1.bias", ff_dim);
  w2_ = w("ff2", ff_dim, dim);
  b2_ = z("ff2.bias", dim);
  ln2_g_ = one("ln2.gamma", dim);
  ln2_b_ = z("ln2.beta", dim);
}

Tensor TransformerBlock::forward(const Tensor& x, double dropout, Rng* rng,
                                 const Tensor& key_bias) const {
  if (x.dim() != 2 || x.cols() != dim_) {
    throw DimensionError("transformer: expected [len, " +
                         std::to_string(dim_) + "] input");
  }
  const double rate = rng ? dropout : 0.0;
  auto drop = [&](const Tensor& t) {
    return rate > 0.0 ? nn::dropout(t, rate, *rng) : t;
  };

  const Tensor q = nn::add_row(nn::matmul(x, wq_), bq_);
  const Tensor k = nn::add_row(nn::matmul(x, wk_), bk_);
  const Tensor v = nn::add_row(nn::matmul(x, wv_), bv_);
  const std::size_t dh = dim_ / heads_;
  std::vector<Tensor> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t b = h * dh;
    outs.push_back(nn::attention(nn::slice_cols(q, b, b + dh),
                                 nn::slice_cols(k, b, b + dh),
                                 nn::slice_cols(v, b, b + dh), key_bias));
  }
  const Tensor heads = heads_ == 1 ? outs.front() : nn::hcat(outs);
  const Tensor attn = drop(nn::add_row(nn::matmul(heads, wo_), bo_));
  const Tensor h1 = nn::layer_norm(nn::add(x, attn), ln1_g_, ln1_b_);

  const Tensor ff = nn::add_row(
      nn::matmul(nn::gelu(nn::add_row(nn::matmul(h1, w1_), b1_)), w2_), b2_);
  return nn::layer_norm(nn::add(h1, drop(ff)), ln2_g_, ln2_b_);
}

}  // namespace tlmg::tlm
