#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlmg/numerics/tensor.hpp"

namespace tlmg::nn {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moment buffers, index-aligned with a parameter list.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update at step `step` (1-based). Non-trainable
/// parameters are skipped; a trainable one without a gradient buffer throws.
void adam_step(std::span<Parameter> params, AdamState& state,
               const AdamConfig& config, std::uint64_t step);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void zero_grad();
  std::uint64_t steps() const { return state_.step; }
  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  AdamState state_;
};

}  // namespace tlmg::nn
