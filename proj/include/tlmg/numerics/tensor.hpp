#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tlmg::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorImpl;

/// Dense row-major array of doubles with an optional reverse-mode record.
///
/// A Tensor is a cheap handle; copies share storage. Every op that consumes a
/// tensor requiring gradients records a backward closure on the result. Each
/// record carries a creation sequence number, and backward() replays the
/// reachable records in decreasing sequence order, which is a valid reverse
/// topological order because an op's inputs always exist before its output.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size() const;
  // 2-D helpers; a 1-D tensor counts as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Writable view. Only valid for leaves or tensors outside any recorded graph.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  // Gradient buffer; empty when no gradient has been accumulated or zeroed.
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();
  // Reverse-mode sweep from a scalar. Accumulates into leaf gradients.
  void backward() const;

  // Copy of the values with no gradient record.
  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>,
                            std::vector<Tensor> const&,
                            std::function<void(TensorImpl&)>);
  friend Tensor wrap(std::shared_ptr<TensorImpl>);

  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this->grad and accumulates into the parents.
  std::function<void(TensorImpl&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

// Builds an op result. When gradients are enabled and any input requires
// them, the result records `backward_fn` and references the inputs.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> const& inputs,
                   std::function<void(TensorImpl&)> backward_fn);
Tensor wrap(std::shared_ptr<TensorImpl> impl);

bool grad_enabled();

// Disables gradient recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// A named model tensor.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Owns the parameters of one model; names are unique.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor tensor, bool trainable = true);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  void set_trainable(bool trainable);
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace tlmg::nn
