#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "muco/grad/gradcheck.hpp"
#include "muco/grad/ops.hpp"
#include "muco/grad/sgd.hpp"

using namespace muco::grad;

namespace {

std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), uniform_values(rng, n, lo, hi));
}

// Projects any output onto a fixed random direction so every output entry
// contributes to the scalar being checked.
Tensor project(const Tensor& out, const Tensor& direction) {
  return neg_dot(reshape(out, {out.size()}), direction);
}

void expect_gradients(const std::function<Tensor(const Tensor&, std::mt19937_64&)>& make_f,
                      const std::function<Tensor(std::mt19937_64&)>& make_point,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor point = make_point(rng);
    std::mt19937_64 frozen_rng(rng());
    auto f = [&](const Tensor& x) {
      std::mt19937_64 local = frozen_rng;
      return make_f(x, local);
    };
    auto result = grad_check(f, point, 1e-5);
    EXPECT_LE(result.max_relative_error, 1e-4)
        << "trial " << trial << " index " << result.worst_index << " analytic " << result.analytic
        << " numeric " << result.numeric;
  }
}

}  // namespace

TEST(Affine, IdentityAndSum) {
  auto out = affine(Tensor::matrix(1, 2, {1, 0}), Tensor::matrix(2, 2, {1, 0, 0, 1}),
                    Tensor::vector({0, 0}));
  EXPECT_EQ(out.shape(), (Shape{1, 2}));
  EXPECT_EQ(out.at(0, 0), 1.0);
  EXPECT_EQ(out.at(0, 1), 0.0);

  auto sum_bias = affine(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {1, 1}),
                         Tensor::vector({3}));
  EXPECT_EQ(sum_bias.at(0, 0), 6.0);
}

TEST(Affine, BiasGradientIsOnes) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(rng, {4, 3});
  Tensor w = random_tensor(rng, {3, 5});
  Tensor b = Tensor::zeros({5}, true);
  Tape tape;
  auto loss = sum(affine(x, w, b));
  tape.backward(loss);
  for (double g : b.grad()) EXPECT_DOUBLE_EQ(g, 4.0);

  Tensor b1 = Tensor::zeros({5}, true);
  Tape single;
  single.backward(sum(affine(Tensor::matrix(1, 3, {1, 2, 3}), w, b1)));
  for (double g : b1.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  try {
    affine(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(3, 1, {1, 1, 1}), Tensor::vector({0}));
    FAIL();
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[1, 2]"), std::string::npos);
    EXPECT_NE(msg.find("[3, 1]"), std::string::npos);
  }
}

TEST(L2Normalize, Examples) {
  auto a = l2_normalize(Tensor::vector({3, 4}));
  EXPECT_DOUBLE_EQ(a[0], 0.6);
  EXPECT_DOUBLE_EQ(a[1], 0.8);
  auto b = l2_normalize(Tensor::vector({0, 0, 5}));
  EXPECT_EQ(b[0], 0.0);
  EXPECT_EQ(b[1], 0.0);
  EXPECT_EQ(b[2], 1.0);
  EXPECT_THROW(l2_normalize(Tensor::vector({0, 0})), DegenerateInputError);
}

TEST(L2Normalize, UnitNormAndScaleInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = uniform_values(rng, 7, -3, 3);
    auto u = l2_normalize(Tensor::vector(v));
    double sq = 0;
    for (double x : u.values()) sq += x * x;
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-9);
    std::vector<double> scaled(v);
    for (auto& x : scaled) x *= 7.3;
    auto us = l2_normalize(Tensor::vector(scaled));
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(us[i], u[i], 1e-9);
  }
}

TEST(NegDot, Examples) {
  EXPECT_EQ(neg_dot(Tensor::vector({1, 0}), Tensor::vector({1, 0})).item(), -1.0);
  EXPECT_EQ(neg_dot(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item(), 0.0);
  EXPECT_EQ(neg_dot(Tensor::vector({1, 0}), Tensor::vector({-1, 0})).item(), 1.0);
  EXPECT_THROW(neg_dot(Tensor::vector({1, 0}), Tensor::vector({1, 0, 0})), DimensionError);
}

TEST(SoftmaxXent, Examples) {
  EXPECT_NEAR(softmax_xent(Tensor::vector({0, 0}), Tensor::vector({1, 0})).item(), std::log(2.0),
              1e-15);
  EXPECT_NEAR(softmax_xent(Tensor::vector({100, 0}), Tensor::vector({1, 0})).item(), 0.0, 1e-40);
  const double e = std::exp(1.0);
  const double bound = -std::log(e / (e + 3.0 / e));
  EXPECT_NEAR(softmax_xent(Tensor::vector({1, -1, -1, -1}), Tensor::vector({1, 0, 0, 0})).item(),
              bound, 1e-12);
  EXPECT_NEAR(bound, std::log1p(3.0 * std::exp(-2.0)), 1e-15);
}

TEST(SoftmaxXent, RejectsNonDistributions) {
  EXPECT_THROW(softmax_xent(Tensor::vector({0, 0}), Tensor::vector({0.5, 0.6})), ValidationError);
  EXPECT_THROW(softmax_xent(Tensor::vector({0, 0}), Tensor::vector({1.5, -0.5})), ValidationError);
  EXPECT_NO_THROW(softmax_xent(Tensor::vector({0, 0}), Tensor::vector({0.5, 0.5 + 1e-10})));
}

TEST(Softmax, PositiveAndNormalized) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto logits = uniform_values(rng, 1 + trial % 9, -50, 50);
    auto p = softmax(logits);
    double total = 0;
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(SigmoidBce, Examples) {
  EXPECT_NEAR(sigmoid_bce(Tensor::scalar(0), 1.0).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(sigmoid_bce(Tensor::scalar(20), 1.0).item(), 0.0, 1e-8);
  EXPECT_NEAR(sigmoid_bce(Tensor::scalar(0), 0.0).item(), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(sigmoid_bce(Tensor::scalar(-800), 1.0).item()));
}

TEST(Primitives, Examples) {
  auto d = abs_diff(Tensor::vector({1, -2}), Tensor::vector({3, 1}));
  EXPECT_EQ(d[0], 2.0);
  EXPECT_EQ(d[1], 3.0);
  auto c = concat({Tensor::vector({1}), Tensor::vector({2, 3})});
  EXPECT_EQ(c.shape(), (Shape{3}));
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[2], 3.0);
  auto m = mean_rows(Tensor::matrix(2, 2, {0, 2, 2, 0}));
  EXPECT_EQ(m[0], 1.0);
  EXPECT_EQ(m[1], 1.0);
  EXPECT_THROW(add(Tensor::vector({1}), Tensor::vector({1, 2})), DimensionError);
}

TEST(AbsDiff, SubgradientAtZeroIsZero) {
  Tensor a = Tensor::vector({1.0, 2.0}, true);
  Tensor b = Tensor::vector({1.0, 0.0}, true);
  Tape tape;
  tape.backward(sum(abs_diff(a, b)));
  EXPECT_EQ(a.grad()[0], 0.0);
  EXPECT_EQ(b.grad()[0], 0.0);
  EXPECT_EQ(a.grad()[1], 1.0);
  EXPECT_EQ(b.grad()[1], -1.0);
}

TEST(Tape, ReverseOrderAndAdditiveAccumulation) {
  // f(x) = x.x + 3 * sum(x); x is consumed by three recorded ops.
  Tensor x = Tensor::vector({0.5, -1.5, 2.0}, true);
  Tape tape;
  auto f = add(scale(neg_dot(x, x), -1.0), scale(sum(x), 3.0));
  std::vector<std::string> seen;
  tape.backward(f, [&](const Tape::Entry& e) { seen.push_back(e.op); });
  ASSERT_EQ(seen.size(), tape.size());
  for (std::size_t i = 0; i < seen.size(); ++i) {
    EXPECT_EQ(seen[i], tape.entries()[tape.size() - 1 - i].op);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i] + 3.0);
}

TEST(Tape, NoGradGuardSuspendsRecording) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  {
    NoGradGuard guard;
    auto y = tanh(x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(tape.size(), 0u);
  tanh(x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(GradCheck, DerivedExamples) {
  std::mt19937_64 rng(17);
  Tensor partner = random_tensor(rng, {6});
  for (int trial = 0; trial < 20; ++trial) {
    auto r = grad_check([&](const Tensor& x) { return neg_dot(x, partner); },
                        random_tensor(rng, {6}, -5, 5));
    EXPECT_LE(r.max_relative_error, 1e-7);
  }
  auto r = grad_check([](const Tensor& x) { return sum(l2_normalize(x)); },
                      Tensor::vector({3, 4}), 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor target = Tensor::vector(softmax(uniform_values(rng, 5, -1, 1)));
    auto rx = grad_check([&](const Tensor& x) { return softmax_xent(x, target); },
                         random_tensor(rng, {5}, -2, 2), 1e-5);
    EXPECT_LE(rx.max_relative_error, 1e-4);
  }
}

TEST(GradCheck, RaisesOnNonFinite) {
  EXPECT_THROW(grad_check([](const Tensor& x) { return scale(sum(x), 1e308 * 10); },
                          Tensor::vector({1.0})),
               NumericalError);
}

TEST(GradCheck, EveryOperation) {
  auto dir = [](std::mt19937_64& rng, std::size_t n) { return random_tensor(rng, {n}); };
  auto point = [](Shape s) {
    return [s](std::mt19937_64& rng) { return random_tensor(rng, s); };
  };

  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    Tensor w = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4});
    return project(affine(x, w, b), dir(rng, 8));
  }, point({2, 3}), 1);
  expect_gradients([&](const Tensor& w, std::mt19937_64& rng) {
    Tensor x = random_tensor(rng, {2, 3});
    Tensor b = random_tensor(rng, {4});
    return project(affine(x, w, b), dir(rng, 8));
  }, point({3, 4}), 2);
  expect_gradients([&](const Tensor& b, std::mt19937_64& rng) {
    Tensor x = random_tensor(rng, {2, 3});
    Tensor w = random_tensor(rng, {3, 4});
    return project(affine(x, w, b), dir(rng, 8));
  }, point({4}), 3);
  expect_gradients([&](const Tensor& a, std::mt19937_64& rng) {
    Tensor b = random_tensor(rng, {4, 3});
    return project(matmul_nt(a, b), dir(rng, 8));
  }, point({2, 3}), 4);
  expect_gradients([&](const Tensor& b, std::mt19937_64& rng) {
    Tensor a = random_tensor(rng, {2, 3});
    return project(matmul_nt(a, b), dir(rng, 8));
  }, point({4, 3}), 5);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(l2_normalize(x), dir(rng, 5));
  }, point({5}), 6);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(l2_normalize(x), dir(rng, 6));
  }, point({2, 3}), 7);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return neg_dot(x, dir(rng, 4));
  }, point({4}), 8);
  expect_gradients([&](const Tensor& s, std::mt19937_64& rng) {
    return project(scale(random_tensor(rng, {3}), s), dir(rng, 3));
  }, point({1}), 9);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(scale(x, Tensor::scalar(1.7)), dir(rng, 3));
  }, point({3}), 10);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(add(x, random_tensor(rng, {2, 2})), dir(rng, 4));
  }, point({2, 2}), 11);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(tanh(x), dir(rng, 6));
  }, point({2, 3}), 12);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    // Keep the partner away from x so the kink is never straddled.
    Tensor other = random_tensor(rng, {4}, 1.5, 2.5);
    return project(abs_diff(x, other), dir(rng, 4));
  }, point({4}), 13);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    Tensor other = random_tensor(rng, {2, 2});
    return project(concat({other, x, x}), dir(rng, 16));
  }, point({2, 3}), 14);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return project(mean_rows(x), dir(rng, 3));
  }, point({4, 3}), 15);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    return scale(sum(tanh(x)), random_tensor(rng, {1}));
  }, point({5}), 16);
  expect_gradients([&](const Tensor& table, std::mt19937_64& rng) {
    const std::size_t ids[] = {2, 0, 2, 3};
    return project(gather_rows(table, ids), dir(rng, 12));
  }, point({5, 3}), 17);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    std::vector<double> t;
    for (int r = 0; r < 3; ++r) {
      auto row = softmax(uniform_values(rng, 4, -1, 1));
      t.insert(t.end(), row.begin(), row.end());
    }
    return softmax_xent(x, Tensor::matrix(3, 4, t));
  }, [](std::mt19937_64& rng) { return random_tensor(rng, {3, 4}, -2, 2); }, 18);
  expect_gradients([&](const Tensor& x, std::mt19937_64& rng) {
    std::vector<double> labels(x.size());
    for (auto& l : labels) l = static_cast<double>(rng() % 2);
    return sigmoid_bce(x, labels);
  }, [](std::mt19937_64& rng) { return random_tensor(rng, {6}, -4, 4); }, 19);
}

TEST(Sgd, StepsAgainstGradientAndClears) {
  Tensor p = Tensor::vector({1.0, -1.0}, true);
  Sgd opt({p}, 0.5);
  {
    Tape tape;
    tape.backward(sum(p));
  }
  opt.step();
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], -1.5);
  for (double g : p.grad()) EXPECT_EQ(g, 0.0);
}
