#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vinet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

// Receives the gradient of the op's output and accumulates into its inputs.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

/// Dense row-major double tensor taking part in a reverse-mode graph.
///
/// Tensor is a shared handle: copies alias the same storage. Ops never mutate
/// their inputs; they allocate a fresh result and, when any input requires a
/// gradient and grad mode is enabled, record a backward closure on it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Writable storage; only legal on tensors without grad history (leaves).
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  // Gradient buffer, allocated (zeroed) on first access.
  std::span<double> grad_buffer() const;
  void zero_grad();
  void clear_grad();

  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;
  // Differentiable reshape (copies storage).
  Tensor reshape(Shape shape) const;

  // Accumulate d(this)/d(leaf) into every reachable leaf that requires grad.
  void backward() const;

  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  // Op authoring: build a result tensor and, when needed, attach `fn` to it.
  static Tensor record(std::string_view op_name, Shape shape, std::vector<double> values,
                       std::vector<Tensor> inputs, BackwardFn fn);

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const detail::TensorImpl& impl() const;
  detail::TensorImpl& impl();

  std::shared_ptr<detail::TensorImpl> impl_;

  friend void backward(const Tensor& loss);
};

void backward(const Tensor& loss);

bool grad_mode_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

// Throws ContractViolation on duplicate names.
void check_unique_names(const ParameterList& params);

void zero_grads(ParameterList& params);

// Plain SGD: w <- w - lr * grad, then grads are zeroed. Every parameter must
// carry a gradient.
void sgd_step(ParameterList& params, double lr);

}  // namespace vinet
