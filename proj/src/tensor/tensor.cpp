#include "vinet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "vinet/errors.hpp"

namespace vinet {

namespace detail {

struct Node {
  std::string name;
  std::vector<Tensor> inputs;
  BackwardFn fn;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty when absent
  std::unique_ptr<Node> node;
};

}  // namespace detail

namespace {
thread_local bool g_grad_mode = true;
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ContractViolation("tensor shape " + shape_str(shape) + " has a zero dimension");
  }
  if (shape_numel(shape) != values.size()) {
    throw ContractViolation("tensor shape " + shape_str(shape) + " needs " +
                            std::to_string(shape_numel(shape)) + " values, got " +
                            std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractViolation("use of an undefined tensor");
  return *impl_;
}

detail::TensorImpl& Tensor::impl() {
  if (!impl_) throw ContractViolation("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ContractViolation("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::values() const { return impl().data; }

std::span<double> Tensor::mutable_values() {
  if (impl().node) throw ContractViolation("cannot write into a tensor with grad history");
  return impl().data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractViolation("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
bool Tensor::is_leaf() const { return impl().node == nullptr; }
bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractViolation("tensor " + shape_str(shape()) + " has no gradient");
  return impl().grad;
}

std::span<double> Tensor::grad_buffer() const {
  auto& g = impl_->grad;
  if (g.empty()) g.assign(impl_->data.size(), 0.0);
  return g;
}

void Tensor::zero_grad() {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::clear_grad() {
  impl().grad.clear();
  impl().grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return from_data(shape(), impl().data, false); }

Tensor Tensor::clone(bool requires_grad) const { return from_data(shape(), impl().data, requires_grad); }

Tensor Tensor::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ContractViolation("cannot reshape " + shape_str(shape()) + " to " + shape_str(new_shape));
  }
  Tensor self = *this;
  return record("reshape", std::move(new_shape), impl().data, {self}, [self](std::span<const double> g) {
    auto dst = self.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Tensor Tensor::record(std::string_view op_name, Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, BackwardFn fn) {
  Tensor out = from_data(std::move(shape), std::move(values), false);
  if (!g_grad_mode) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  out.impl_->requires_grad = true;
  auto node = std::make_unique<detail::Node>();
  node->name = std::string(op_name);
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) {
    if (t.defined()) node->inputs.push_back(std::move(t));
  }
  node->fn = std::move(fn);
  out.impl_->node = std::move(node);
  return out;
}

void Tensor::backward() const { vinet::backward(*this); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractViolation("backward() needs a scalar loss, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order; each impl is visited once.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl_.get(), 0);
  seen.insert(loss.impl_.get());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (impl->node && next < impl->node->inputs.size()) {
      auto* child = impl->node->inputs[next++].impl_.get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }

  // Interior gradients are scratch space for this pass only, so a repeated
  // backward() accumulates into leaves exactly once more.
  for (auto* impl : order) {
    if (impl->node) impl->grad.assign(impl->data.size(), 0.0);
  }
  if (loss.impl_->grad.empty()) loss.impl_->grad.assign(1, 0.0);
  loss.impl_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* impl = *it;
    if (!impl->node) continue;
    impl->node->fn(impl->grad);
    impl->grad.clear();
    impl->grad.shrink_to_fit();
  }
}

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }

void check_unique_names(const ParameterList& params) {
  std::set<std::string> names;
  for (const auto& p : params) {
    if (!names.insert(p.name).second) throw ContractViolation("duplicate parameter name '" + p.name + "'");
  }
}

void zero_grads(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

void sgd_step(ParameterList& params, double lr) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractViolation("parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : params) {
    auto w = p.tensor.mutable_values();
    auto g = p.tensor.grad_buffer();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * g[i];
      g[i] = 0.0;
    }
  }
}

}  // namespace vinet
