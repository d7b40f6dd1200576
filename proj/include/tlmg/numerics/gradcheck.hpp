#pragma once

#include <functional>
#include <vector>

#include "tlmg/numerics/tensor.hpp"

namespace tlmg::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  // Location of the worst entry.
  std::size_t param_index = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences (f(x + h) - f(x - h)) / 2h for every element of `params`.
///
/// The relative error of one element is |a - n| / max(|a|, |n|, floor). The
/// floor keeps near-zero gradients from turning rounding noise into large
/// ratios. Throws NumericalError if f is non-finite anywhere it is evaluated.
GradCheckResult check_gradients(const std::function<Tensor()>& f,
                                const std::vector<Tensor>& params,
                                double h = 1e-6, double floor = 1e-4);

}  // namespace tlmg::nn
