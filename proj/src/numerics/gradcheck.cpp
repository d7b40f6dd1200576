#include "tlmg/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tlmg/error.hpp"

namespace tlmg::nn {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericalError("check_gradients: f is not finite");
  return v;
}

}  // namespace

GradCheckResult check_gradients(const std::function<Tensor()>& f,
                                const std::vector<Tensor>& params, double h,
                                double floor) {
  std::vector<Tensor> ps = params;
  for (auto& p : ps) {
    if (!p.requires_grad()) {
      throw DomainError("check_gradients: parameter does not require grad");
    }
    p.zero_grad();
  }
  Tensor out = f();
  if (!std::isfinite(out.item())) {
    throw NumericalError("check_gradients: f is not finite");
  }
  out.backward();

  GradCheckResult result;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    std::vector<double> analytic(ps[pi].grad().begin(), ps[pi].grad().end());
    auto data = ps[pi].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = eval_scalar(f);
      data[i] = saved - h;
      const double down = eval_scalar(f);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > result.max_relative_error || (pi == 0 && i == 0)) {
        result = {err, pi, i, analytic[i], numeric};
      }
    }
  }
  return result;
}

}  // namespace tlmg::nn
