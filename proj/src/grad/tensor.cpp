#include "muco/grad/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace muco::grad {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

TensorImpl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::size() const { return impl().values.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.back();
}

std::span<const double> Tensor::values() const { return impl().values; }
std::span<double> Tensor::mutable_values() { return impl().values; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return impl().values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return impl().values[r * cols() + c]; }

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool value) { impl().requires_grad = value; }
bool Tensor::has_grad() const { return !impl().grad.empty(); }
std::span<const double> Tensor::grad() const { return impl().grad; }

std::span<double> Tensor::mutable_grad() const {
  auto& t = impl();
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  return t.grad;
}

void Tensor::zero_grad() {
  auto& t = impl();
  std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto copy = std::make_shared<TensorImpl>(impl());
  copy->grad.clear();
  return Tensor(std::move(copy));
}

Tensor Tensor::detach() const {
  Tensor out = clone();
  out.set_requires_grad(false);
  return out;
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::string_view op, std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
  entries_.push_back(Entry{std::string(op), std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss, const std::function<void(const Entry&)>& observer) {
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a single-element loss, got shape " +
                         shape_string(loss.shape()));
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    if (observer) observer(*it);
    it->backward();
  }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

}  // namespace muco::grad
