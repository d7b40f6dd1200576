#include "tlmg/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "tlmg/error.hpp"

namespace tlmg::nn {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_next_seq = 1;

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> values,
                                     bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_size(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  impl->seq = g_next_seq++;
  return impl;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
  }
  std::vector<double> values(shape_size(shape), value);
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
  }
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() != 2) {
    throw DimensionError("expected a matrix, got shape " + shape_string(s));
  }
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() == 1) return s[0];
  if (s.size() != 2) {
    throw DimensionError("expected a matrix, got shape " + shape_string(s));
  }
  return s[1];
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
std::span<const double> Tensor::grad() const { return impl_->grad; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

void Tensor::backward() const {
  if (size() != 1) {
    throw DimensionError("backward() needs a scalar, got shape " +
                         shape_string(shape()));
  }
  if (!impl_->requires_grad) return;

  // Collect every recorded node reachable from this one.
  std::vector<TensorImpl*> all;
  std::unordered_set<const TensorImpl*> seen;
  std::vector<TensorImpl*> stack{impl_.get()};
  while (!stack.empty()) {
    TensorImpl* node = stack.back();
    stack.pop_back();
    if (!node->backward_fn) continue;
    if (!seen.insert(node).second) continue;
    all.push_back(node);
    for (auto& p : node->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(all.begin(), all.end(), [](const TensorImpl* a, const TensorImpl* b) {
    return a->seq > b->seq;
  });

  impl_->ensure_grad();
  impl_->grad[0] += 1.0;
  for (TensorImpl* node : all) {
    if (node->grad.empty() || !node->backward_fn) continue;
    for (auto& p : node->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    node->backward_fn(*node);
  }
  // Release intermediate gradient buffers; leaves keep theirs.
  for (TensorImpl* node : all) {
    if (node != impl_.get()) node->grad.clear();
  }
}

Tensor Tensor::detach() const {
  return Tensor(new_impl(impl_->shape, impl_->data, false));
}

Tensor Tensor::clone() const {
  return Tensor(new_impl(impl_->shape, impl_->data, impl_->requires_grad));
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> const& inputs,
                   std::function<void(TensorImpl&)> backward_fn) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) {
      if (t.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  auto impl = new_impl(std::move(shape), std::move(values), needs);
  if (needs) {
    impl->parents.reserve(inputs.size());
    for (const auto& t : inputs) impl->parents.push_back(t.impl_ptr());
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& ParameterStore::add(const std::string& name, Tensor tensor,
                            bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.impl()->requires_grad = trainable;
  params_.push_back({name, std::move(tensor), trainable});
  return params_.back().tensor;
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter: " + name);
}

const Parameter& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter: " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

void ParameterStore::set_trainable(bool trainable) {
  for (auto& p : params_) {
    p.trainable = trainable;
    p.tensor.impl()->requires_grad = trainable;
  }
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    if (p.trainable) p.tensor.zero_grad();
  }
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

}  // namespace tlmg::nn
