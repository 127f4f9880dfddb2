#include "muco/eval/gradient_suite.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "muco/grad/gradcheck.hpp"
#include "muco/grad/ops.hpp"
#include "muco/joint/joint.hpp"
#include "muco/miner/miner.hpp"
#include "muco/proto/prototypes.hpp"

namespace muco {

namespace {

using grad::Shape;

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(grad::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<double> random_distribution(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> logits(n);
  for (auto& x : logits) x = dist(rng);
  return grad::softmax(logits);
}

// Folds every output entry into one scalar along a fixed random direction.
Tensor project(const Tensor& out, const Tensor& direction) {
  return grad::neg_dot(grad::reshape(out, {out.size()}), direction);
}

class Suite {
 public:
  Suite(std::uint64_t seed, std::size_t points) : rng_(seed), points_(points) {}

  // f builds the scalar from the probe point and a generator fixed per point.
  void point_case(const std::string& name, Shape shape,
                  const std::function<Tensor(const Tensor&, Rng&)>& f, double lo = -1.0,
                  double hi = 1.0) {
    GradientCase c{name, points_};
    for (std::size_t p = 0; p < points_; ++p) {
      const Tensor point = random_tensor(rng_, shape, lo, hi);
      const Rng fixed(rng_());
      auto bound = [&](const Tensor& x) {
        Rng local = fixed;
        return f(x, local);
      };
      record(c, grad::grad_check(bound, point));
    }
    results_.push_back(c);
  }

  // setup draws fresh model state and returns the loss and the parameters to
  // check.
  using Setup = std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Rng&)>;
  void parameter_case(const std::string& name, const Setup& setup) {
    GradientCase c{name, points_};
    for (std::size_t p = 0; p < points_; ++p) {
      Rng local(rng_());
      auto [loss, params] = setup(local);
      for (auto& param : params) {
        record(c, grad::grad_check_parameter(loss, param));
      }
    }
    results_.push_back(c);
  }

  std::vector<GradientCase> take() { return std::move(results_); }

 private:
  static void record(GradientCase& c, const grad::GradCheckResult& r) {
    if (r.max_relative_error < c.max_relative_error) return;
    c.max_relative_error = r.max_relative_error;
    c.analytic = r.analytic;
    c.numeric = r.numeric;
  }

  Rng rng_;
  std::size_t points_;
  std::vector<GradientCase> results_;
};

struct TinyModel {
  Sentence sentence;
  Encoder encoder;
  PrototypeTable table;
};

TinyModel tiny_model(Rng& rng, const std::vector<std::string>& classes) {
  TinyModel m;
  Vocabulary vocab;
  for (const char* t : {"a", "b", "c", "d"}) vocab.add(t);
  EncoderConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.window = 1;
  m.encoder = Encoder::create(vocab, cfg, rng);
  m.sentence.tokens = {"a", "c", "b", "d"};
  m.sentence.tags = {"O", "B-X", "O", "O"};
  m.table = PrototypeTable::init(classes, cfg.hidden_dim, rng);
  // Large s saturates the softmax and leaves components below the finite
  // difference roundoff floor.
  std::uniform_real_distribution<double> scale(0.5, 4.0);
  m.table.set_scale(scale(rng));
  return m;
}

std::vector<Tensor> model_parameters(const TinyModel& m, bool with_scale) {
  std::vector<Tensor> params = m.encoder.parameters();
  params.push_back(m.table.vectors());
  if (with_scale) params.push_back(m.table.scale());
  return params;
}

}  // namespace

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t points) {
  Suite s(seed, points);
  auto dir = [](Rng& rng, std::size_t n) { return random_tensor(rng, {n}); };

  s.point_case("affine/input", {2, 3}, [&](const Tensor& x, Rng& r) {
    Tensor w = random_tensor(r, {3, 4});
    Tensor b = random_tensor(r, {4});
    return project(grad::affine(x, w, b), dir(r, 8));
  });
  s.point_case("affine/weight", {3, 4}, [&](const Tensor& w, Rng& r) {
    Tensor x = random_tensor(r, {2, 3});
    Tensor b = random_tensor(r, {4});
    return project(grad::affine(x, w, b), dir(r, 8));
  });
  s.point_case("affine/bias", {4}, [&](const Tensor& b, Rng& r) {
    Tensor x = random_tensor(r, {2, 3});
    Tensor w = random_tensor(r, {3, 4});
    return project(grad::affine(x, w, b), dir(r, 8));
  });
  s.point_case("matmul_nt/left", {2, 3}, [&](const Tensor& a, Rng& r) {
    return project(grad::matmul_nt(a, random_tensor(r, {4, 3})), dir(r, 8));
  });
  s.point_case("matmul_nt/right", {4, 3}, [&](const Tensor& b, Rng& r) {
    return project(grad::matmul_nt(random_tensor(r, {2, 3}), b), dir(r, 8));
  });
  s.point_case("l2_normalize/vector", {5}, [&](const Tensor& x, Rng& r) {
    return project(grad::l2_normalize(x), dir(r, 5));
  });
  s.point_case("l2_normalize/rows", {3, 4}, [&](const Tensor& x, Rng& r) {
    return project(grad::l2_normalize(x), dir(r, 12));
  });
  s.point_case("neg_dot", {4}, [&](const Tensor& x, Rng& r) {
    return grad::neg_dot(x, dir(r, 4));
  });
  s.point_case("scale/tensor", {1}, [&](const Tensor& k, Rng& r) {
    return project(grad::scale(random_tensor(r, {3}), k), dir(r, 3));
  });
  s.point_case("scale/constant", {3}, [&](const Tensor& x, Rng& r) {
    return project(grad::scale(x, 1.7), dir(r, 3));
  });
  s.point_case("add", {2, 2}, [&](const Tensor& x, Rng& r) {
    return project(grad::add(x, random_tensor(r, {2, 2})), dir(r, 4));
  });
  s.point_case("tanh", {2, 3}, [&](const Tensor& x, Rng& r) {
    return project(grad::tanh(x), dir(r, 6));
  }, -2.0, 2.0);
  s.point_case("abs_diff", {4}, [&](const Tensor& x, Rng& r) {
    // The partner stays clear of x so no kink is straddled.
    return project(grad::abs_diff(x, random_tensor(r, {4}, 1.5, 2.5)), dir(r, 4));
  });
  s.point_case("concat", {2, 3}, [&](const Tensor& x, Rng& r) {
    return project(grad::concat({random_tensor(r, {2, 2}), x, x}), dir(r, 16));
  });
  s.point_case("mean_rows", {4, 3}, [&](const Tensor& x, Rng& r) {
    return project(grad::mean_rows(x), dir(r, 3));
  });
  s.point_case("sum", {5}, [&](const Tensor& x, Rng& r) {
    return grad::scale(grad::sum(grad::tanh(x)), random_tensor(r, {1}));
  });
  s.point_case("gather_rows", {5, 3}, [&](const Tensor& t, Rng& r) {
    const std::size_t ids[] = {2, 0, 2, 4};
    return project(grad::gather_rows(t, ids), dir(r, 12));
  });
  s.point_case("reshape", {2, 3}, [&](const Tensor& x, Rng& r) {
    return project(grad::tanh(grad::reshape(x, {3, 2})), dir(r, 6));
  });
  s.point_case("softmax_xent", {3, 4}, [&](const Tensor& x, Rng& r) {
    std::vector<double> t;
    for (int row = 0; row < 3; ++row) {
      auto d = random_distribution(r, 4);
      t.insert(t.end(), d.begin(), d.end());
    }
    return grad::softmax_xent(x, Tensor::matrix(3, 4, t));
  }, -2.0, 2.0);
  s.point_case("sigmoid_bce", {6}, [&](const Tensor& x, Rng& r) {
    std::vector<double> labels(x.size());
    for (auto& l : labels) l = static_cast<double>(r() % 2);
    return grad::sigmoid_bce(x, labels);
  }, -4.0, 4.0);

  // Prototype loss, unscaled.
  const std::vector<std::string> classes{"X", "Y", "Z"};
  s.point_case("prototype_loss/hidden", {2, 4}, [&](const Tensor& h, Rng& r) {
    TinyModel m = tiny_model(r, classes);
    const Tensor logits = class_logits(h, m.table, {0, 1, 2}, false);
    return grad::softmax_xent(logits, Tensor::matrix(2, 3, {1, 0, 0, 0, 0, 1}));
  });
  s.parameter_case("prototype_loss/model", [&](Rng& r) {
    auto m = std::make_shared<TinyModel>(tiny_model(r, classes));
    std::function<Tensor()> loss = [m] {
      const LabeledExample ex{&m->sentence, 1, "Y"};
      return proto_loss(ex, m->encoder, m->table, {"X", "Y", "Z"}, false);
    };
    return std::make_pair(loss, model_parameters(*m, false));
  });

  // Pair loss on the symmetrized 8-block feature.
  s.point_case("pair_loss/weight", {32}, [&](const Tensor& w, Rng& r) {
    const Tensor hi = random_tensor(r, {4});
    const Tensor hj = random_tensor(r, {4});
    const Tensor ti = random_tensor(r, {4});
    const Tensor tj = random_tensor(r, {4});
    const Tensor b = random_tensor(r, {1});
    const Tensor wm = grad::reshape(w, {32, 1});
    auto logit = [&](const Tensor& f) { return grad::affine(grad::reshape(f, {1, 32}), wm, b); };
    const Tensor z = grad::scale(grad::add(logit(pair_feature(hi, hj, ti, tj)),
                                           logit(pair_feature(hj, hi, tj, ti))), 0.5);
    return grad::sigmoid_bce(grad::reshape(z, {1}), static_cast<double>(r() % 2));
  });
  s.point_case("pair_loss/live_hidden", {4}, [&](const Tensor& ti, Rng& r) {
    const Tensor hi = random_tensor(r, {4}, 2.0, 3.0);
    const Tensor hj = random_tensor(r, {4});
    const Tensor tj = random_tensor(r, {4}, -3.0, -2.0);
    const Tensor w = random_tensor(r, {32, 1});
    const Tensor b = random_tensor(r, {1});
    auto logit = [&](const Tensor& f) { return grad::affine(grad::reshape(f, {1, 32}), w, b); };
    const Tensor z = grad::scale(grad::add(logit(pair_feature(hi, hj, ti, tj)),
                                           logit(pair_feature(hj, hi, tj, ti))), 0.5);
    return grad::sigmoid_bce(grad::reshape(z, {1}), static_cast<double>(r() % 2));
  });

  // Joint loss: scaled, soft targets over mined classes.
  const std::vector<std::string> joint_classes{"X", "o_1", "o_2", kCatchAllClass};
  s.point_case("joint_loss/hidden", {2, 4}, [&](const Tensor& h, Rng& r) {
    TinyModel m = tiny_model(r, joint_classes);
    const auto soft = random_distribution(r, 2);
    const Tensor logits = class_logits(h, m.table, {0, 1, 2, 3}, true);
    return grad::softmax_xent(logits, Tensor::matrix(2, 4, {0, soft[0], soft[1], 0, 1, 0, 0, 0}));
  });
  s.parameter_case("joint_loss/model", [&](Rng& r) {
    auto m = std::make_shared<TinyModel>(tiny_model(r, joint_classes));
    const auto soft = random_distribution(r, 2);
    const std::vector<double> target{0.0, soft[0], soft[1], 0.0};
    std::function<Tensor()> loss = [m, target] {
      return joint_loss(m->sentence, 2, target, m->encoder, m->table, true);
    };
    return std::make_pair(loss, model_parameters(*m, true));
  });

  return s.take();
}

}  // namespace muco
