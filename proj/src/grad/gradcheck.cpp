#include "muco/grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace muco::grad {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  NoGradGuard guard;
  const double v = f(x).item();
  if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const Tensor& point, double h) {
  Tensor x = point.detach();
  x.set_requires_grad(true);
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor y = f(x);
    if (!std::isfinite(y.item())) throw NumericalError("grad_check: non-finite function value");
    tape.backward(y);
    analytic.assign(x.size(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  }

  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(analytic[i])) throw NumericalError("grad_check: non-finite gradient");
    Tensor probe = point.detach();
    const double base = probe.values()[i];
    probe.mutable_values()[i] = base + h;
    const double up = evaluate(f, probe);
    probe.mutable_values()[i] = base - h;
    const double down = evaluate(f, probe);
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

GradCheckResult grad_check_parameter(const std::function<Tensor()>& loss, Tensor param,
                                     double h) {
  if (!param.requires_grad()) throw ValidationError("grad_check_parameter: parameter needs grad");
  param.zero_grad();
  std::vector<double> analytic(param.size(), 0.0);
  {
    Tape tape;
    Tensor y = loss();
    if (!std::isfinite(y.item())) throw NumericalError("grad_check: non-finite function value");
    tape.backward(y);
    if (param.has_grad()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
  }
  param.zero_grad();

  auto eval = [&] {
    NoGradGuard guard;
    const double v = loss().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
    return v;
  };
  GradCheckResult result;
  auto values = param.mutable_values();
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (!std::isfinite(analytic[i])) throw NumericalError("grad_check: non-finite gradient");
    const double base = values[i];
    values[i] = base + h;
    const double up = eval();
    values[i] = base - h;
    const double down = eval();
    values[i] = base;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace muco::grad
