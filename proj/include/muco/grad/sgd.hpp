#pragma once

#include <vector>

#include "muco/grad/tensor.hpp"

namespace muco::grad {

/// Plain stochastic gradient descent with a fixed learning rate.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double learning_rate);

  /// p -= lr * grad(p) for every parameter that has a gradient, then clears
  /// the gradients.
  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  double lr_;
};

}  // namespace muco::grad
