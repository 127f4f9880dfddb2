#include "muco/grad/sgd.hpp"

namespace muco::grad {

Sgd::Sgd(std::vector<Tensor> params, double learning_rate)
    : params_(std::move(params)), lr_(learning_rate) {}

void Sgd::step() {
  for (auto& p : params_) {
    if (!p.has_grad()) continue;
    auto values = p.mutable_values();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr_ * grad[i];
    p.zero_grad();
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace muco::grad
