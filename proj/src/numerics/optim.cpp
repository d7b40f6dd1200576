#include "tlmg/numerics/optim.hpp"

#include <cmath>

#include "tlmg/error.hpp"

namespace tlmg::nn {

namespace {

void update(Parameter& p, std::vector<double>& m, std::vector<double>& v,
            const AdamConfig& c, std::uint64_t step) {
  if (!p.trainable) return;
  if (!p.tensor.has_grad()) {
    throw NumericalError("parameter '" + p.name + "' has no gradient");
  }
  auto data = p.tensor.mutable_data();
  auto grad = p.tensor.grad();
  if (m.size() != data.size()) {
    m.assign(data.size(), 0.0);
    v.assign(data.size(), 0.0);
  }
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    data[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

void adam_step(std::span<Parameter> params, AdamState& state,
               const AdamConfig& config, std::uint64_t step) {
  if (step == 0) throw DomainError("adam_step: step is 1-based");
  state.m.resize(params.size());
  state.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i], state.m[i], state.v[i], config, step);
  }
  state.step = step;
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  state_.m.resize(params_.size());
  state_.v.resize(params_.size());
}

void Adam::step() {
  ++state_.step;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    update(*params_[i], state_.m[i], state_.v[i], config_, state_.step);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) {
    if (p->trainable) p->tensor.zero_grad();
  }
}

}  // namespace tlmg::nn
