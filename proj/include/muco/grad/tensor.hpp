#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace muco::grad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Error types raised by the engine. All derive from standard exceptions so
// callers that only care about "something went wrong" can catch those.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
};

/// Shared handle to a dense row-major float64 array with optional gradient.
///
/// Copies share storage; use clone() for a deep copy. Values are treated as
/// immutable once a tensor participates in a recorded operation, except for
/// optimizer updates on leaf parameters between steps.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;  // allocates zeros on first use; handle semantics
  void zero_grad();

  Tensor clone() const;   // deep copy, keeps requires_grad
  Tensor detach() const;  // deep copy of values only

  const TensorImpl* id() const { return impl_.get(); }
  friend bool same_storage(const Tensor& a, const Tensor& b) { return a.impl_ == b.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  TensorImpl& impl() const;

  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of differentiable operations executed while it is active.
///
/// Constructing a Tape makes it the recording tape for the current thread;
/// destruction restores the previous one. Operations on tensors that require
/// gradients append an entry; backward() replays the entries in exact reverse
/// order, adding each contribution into the inputs' gradient buffers.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::string_view op, std::vector<Tensor> inputs, Tensor output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded entries backwards.
  /// The optional observer sees each entry just before its backward runs.
  void backward(const Tensor& loss, const std::function<void(const Entry&)>& observer = {});

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
};

/// Suspends recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

}  // namespace muco::grad
