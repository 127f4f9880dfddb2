#pragma once

#include <functional>

#include "muco/grad/tensor.hpp"

namespace muco::grad {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the taped gradient of f at point against central differences
/// (f(x+h) - f(x-h)) / 2h, componentwise. The relative error of a component
/// is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// f receives a leaf tensor that requires grad and must return a [1] tensor.
/// Throws NumericalError if any evaluation is non-finite.
GradCheckResult grad_check(const ScalarFunction& f, const Tensor& point, double h = 1e-5);

/// Same comparison for a parameter held inside a model: param is perturbed in
/// place and restored. loss must read param and return a [1] tensor; param
/// must require grad. Gradients left on other tensors are the caller's.
GradCheckResult grad_check_parameter(const std::function<Tensor()>& loss, Tensor param,
                                     double h = 1e-5);

}  // namespace muco::grad
