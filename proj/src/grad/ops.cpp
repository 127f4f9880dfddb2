#include "muco/grad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace muco::grad {

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

bool recording(const std::vector<Tensor>& inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor make_output(Shape shape, std::vector<double> values, bool tracked) {
  return Tensor(std::move(shape), std::move(values), tracked);
}

[[noreturn]] void mismatch(std::string_view op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                       " vs " + shape_string(b.shape()));
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace

Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank("affine weight", weight, 2);
  require_rank("affine bias", bias, 1);
  const std::size_t n = input.rows();
  const std::size_t din = input.cols();
  const std::size_t dout = weight.cols();
  if (weight.rows() != din) mismatch("affine", input, weight);
  if (bias.size() != dout) mismatch("affine", weight, bias);

  const auto x = input.values();
  const auto w = weight.values();
  const auto b = bias.values();
  std::vector<double> out(n * dout);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * dout;
    std::copy(b.begin(), b.end(), row);
    for (std::size_t k = 0; k < din; ++k) {
      const double xv = x[i * din + k];
      if (xv == 0.0) continue;
      const double* wrow = w.data() + k * dout;
      for (std::size_t j = 0; j < dout; ++j) row[j] += xv * wrow[j];
    }
  }
  Shape shape = input.rank() == 1 ? Shape{dout} : Shape{n, dout};
  const bool tracked = recording({&input, &weight, &bias});
  Tensor result = make_output(std::move(shape), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("affine", {input, weight, bias}, result,
                           [input, weight, bias, result, n, din, dout]() mutable {
      const auto go = result.grad();
      if (input.requires_grad()) {
        auto gx = input.mutable_grad();
        const auto w = weight.values();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < din; ++k) {
            double acc = 0.0;
            const double* wrow = w.data() + k * dout;
            const double* grow = go.data() + i * dout;
            for (std::size_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
            gx[i * din + k] += acc;
          }
        }
      }
      if (weight.requires_grad()) {
        auto gw = weight.mutable_grad();
        const auto x = input.values();
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = go.data() + i * dout;
          for (std::size_t k = 0; k < din; ++k) {
            const double xv = x[i * din + k];
            if (xv == 0.0) continue;
            double* gwrow = gw.data() + k * dout;
            for (std::size_t j = 0; j < dout; ++j) gwrow[j] += xv * grow[j];
          }
        }
      }
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < dout; ++j) gb[j] += go[i * dout + j];
      }
    });
  }
  return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank("matmul_nt", b, 2);
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  const std::size_t k = b.rows();
  if (b.cols() != d) mismatch("matmul_nt", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) acc += av[i * d + t] * bv[j * d + t];
      out[i * k + j] = acc;
    }
  }
  Shape shape = a.rank() == 1 ? Shape{k} : Shape{n, k};
  const bool tracked = recording({&a, &b});
  Tensor result = make_output(std::move(shape), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("matmul_nt", {a, b}, result, [a, b, result, n, d, k]() mutable {
      const auto go = result.grad();
      const auto av = a.values();
      const auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double g = go[i * k + j];
            for (std::size_t t = 0; t < d; ++t) ga[i * d + t] += g * bv[j * d + t];
          }
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double g = go[i * k + j];
            for (std::size_t t = 0; t < d; ++t) gb[j * d + t] += g * av[i * d + t];
          }
      }
    });
  }
  return result;
}

Tensor l2_normalize(const Tensor& v) {
  const std::size_t n = v.rows();
  const std::size_t d = v.cols();
  const auto x = v.values();
  std::vector<double> out(x.size());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += x[i * d + j] * x[i * d + j];
    const double norm = std::sqrt(sq);
    if (!(norm > kNormEpsilon)) {
      throw DegenerateInputError("l2_normalize: norm " + std::to_string(norm) + " of row " +
                                 std::to_string(i) + " is below 1e-12");
    }
    norms[i] = norm;
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x[i * d + j] / norm;
  }
  const bool tracked = recording({&v});
  Tensor result = make_output(v.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("l2_normalize", {v}, result,
                           [v, result, norms = std::move(norms), n, d]() mutable {
      const auto go = result.grad();
      const auto u = result.values();
      auto gv = v.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += u[i * d + j] * go[i * d + j];
        for (std::size_t j = 0; j < d; ++j)
          gv[i * d + j] += (go[i * d + j] - u[i * d + j] * dot) / norms[i];
      }
    });
  }
  return result;
}

Tensor neg_dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size()) mismatch("neg_dot", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  const bool tracked = recording({&a, &b});
  Tensor result = make_output({1}, {-acc}, tracked);
  if (tracked) {
    Tape::active()->record("neg_dot", {a, b}, result, [a, b, result]() mutable {
      const double g = result.grad()[0];
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        const auto bv = b.values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= g * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        const auto av = a.values();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * av[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) mismatch("scale", x, s);
  const double factor = s.values()[0];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  const bool tracked = recording({&x, &s});
  Tensor result = make_output(x.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("scale", {x, s}, result, [x, s, result]() mutable {
      const auto go = result.grad();
      const double factor = s.values()[0];
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
      }
      if (s.requires_grad()) {
        const auto xv = x.values();
        double acc = 0.0;
        for (std::size_t i = 0; i < xv.size(); ++i) acc += go[i] * xv[i];
        s.mutable_grad()[0] += acc;
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, double factor) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  const bool tracked = recording({&x});
  Tensor result = make_output(x.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("scale_const", {x}, result, [x, result, factor]() mutable {
      const auto go = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const bool tracked = recording({&a, &b});
  Tensor result = make_output(a.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("add", {a, b}, result, [a, b, result]() mutable {
      const auto go = result.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return result;
}

Tensor tanh(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  const bool tracked = recording({&x});
  Tensor result = make_output(x.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("tanh", {x}, result, [x, result]() mutable {
      const auto go = result.grad();
      const auto y = result.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * (1.0 - y[i] * y[i]);
    });
  }
  return result;
}

Tensor abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("abs_diff", a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::abs(av[i] - bv[i]);
  const bool tracked = recording({&a, &b});
  Tensor result = make_output(a.shape(), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("abs_diff", {a, b}, result, [a, b, result]() mutable {
      const auto go = result.grad();
      const auto av = a.values();
      const auto bv = b.values();
      auto sign = [&](std::size_t i) {
        const double diff = av[i] - bv[i];
        return diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      };
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * sign(i);
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i] * sign(i);
      }
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const std::size_t rank = parts.front().rank();
  const std::size_t n = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank || p.rows() != n) mismatch("concat", parts.front(), p);
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto v = parts[pi].values();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * widths[pi], widths[pi], out.data() + i * total + offset);
    offset += widths[pi];
  }
  Shape shape = rank == 1 ? Shape{total} : Shape{n, total};
  const bool tracked = recording(parts);
  Tensor result = make_output(std::move(shape), std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("concat", parts, result,
                           [parts, result, widths, n, total]() mutable {
      const auto go = result.grad();
      std::size_t offset = 0;
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        if (parts[pi].requires_grad()) {
          auto gp = parts[pi].mutable_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < widths[pi]; ++j)
              gp[i * widths[pi] + j] += go[i * total + offset + j];
        }
        offset += widths[pi];
      }
    });
  }
  return result;
}

Tensor mean_rows(const Tensor& x) {
  require_rank("mean_rows", x, 2);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n == 0) throw DimensionError("mean_rows: no rows");
  const auto xv = x.values();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += xv[i * d + j];
  for (auto& v : out) v /= static_cast<double>(n);
  const bool tracked = recording({&x});
  Tensor result = make_output({d}, std::move(out), tracked);
  if (tracked) {
    Tape::active()->record("mean_rows", {x}, result, [x, result, n, d]() mutable {
      const auto go = result.grad();
      auto gx = x.mutable_grad();
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += go[j] * inv;
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const bool tracked = recording({&x});
  Tensor result = make_output({1}, {acc}, tracked);
  if (tracked) {
    Tape::active()->record("sum", {x}, result, [x, result]() mutable {
      const double g = result.grad()[0];
      auto gx = x.mutable_grad();
      for (auto& v : gx) v += g;
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank("gather_rows", table, 2);
  const std::size_t vocab = table.rows();
  const std::size_t d = table.cols();
  const auto tv = table.values();
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) +
                           " outside table of shape " + shape_string(table.shape()));
    }
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  const bool tracked = recording({&table});
  Tensor result = make_output({ids.size(), d}, std::move(out), tracked);
  if (tracked) {
    std::vector<std::size_t> id_copy(ids.begin(), ids.end());
    Tape::active()->record("gather_rows", {table}, result,
                           [table, result, id_copy = std::move(id_copy), d]() mutable {
      const auto go = result.grad();
      auto gt = table.mutable_grad();
      for (std::size_t i = 0; i < id_copy.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) gt[id_copy[i] * d + j] += go[i * d + j];
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  const auto xv = x.values();
  const bool tracked = recording({&x});
  Tensor result = make_output(std::move(shape), std::vector<double>(xv.begin(), xv.end()), tracked);
  if (tracked) {
    Tape::active()->record("reshape", {x}, result, [x, result]() mutable {
      const auto go = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    });
  }
  return result;
}

Tensor softmax_xent(const Tensor& logits, const Tensor& target) {
  if (logits.shape() != target.shape()) mismatch("softmax_xent", logits, target);
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  if (k == 0 || n == 0) throw DimensionError("softmax_xent: empty logits");
  const auto lv = logits.values();
  const auto tv = target.values();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double t = tv[i * k + j];
      if (!(t >= 0.0)) throw ValidationError("softmax_xent: negative target entry in row " +
                                             std::to_string(i));
      total += t;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
      throw ValidationError("softmax_xent: target row " + std::to_string(i) + " sums to " +
                            std::to_string(total));
    }
  }
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = lv.subspan(i * k, k);
    const double lse = log_sum_exp(row);
    for (std::size_t j = 0; j < k; ++j) {
      const double t = tv[i * k + j];
      if (t != 0.0) loss -= t * (row[j] - lse);
      probs[i * k + j] = std::exp(row[j] - lse);
    }
  }
  loss /= static_cast<double>(n);
  const bool tracked = recording({&logits});
  Tensor result = make_output({1}, {loss}, tracked);
  if (tracked) {
    Tape::active()->record("softmax_xent", {logits, target}, result,
                           [logits, target, result, probs = std::move(probs), n, k]() mutable {
      const double g = result.grad()[0] / static_cast<double>(n);
      const auto tv = target.values();
      auto gl = logits.mutable_grad();
      for (std::size_t i = 0; i < n * k; ++i) gl[i] += g * (probs[i] - tv[i]);
    });
  }
  return result;
}

Tensor sigmoid_bce(const Tensor& logits, std::span<const double> labels) {
  if (logits.rank() != 1 || logits.size() != labels.size()) {
    throw DimensionError("sigmoid_bce: logits " + shape_string(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const auto x = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    loss += std::max(x[i], 0.0) - x[i] * labels[i] + std::log1p(std::exp(-std::abs(x[i])));
  }
  const double n = static_cast<double>(x.size());
  loss /= n;
  const bool tracked = recording({&logits});
  Tensor result = make_output({1}, {loss}, tracked);
  if (tracked) {
    std::vector<double> label_copy(labels.begin(), labels.end());
    Tape::active()->record("sigmoid_bce", {logits}, result,
                           [logits, result, label_copy = std::move(label_copy), n]() mutable {
      const double g = result.grad()[0] / n;
      const auto x = logits.values();
      auto gl = logits.mutable_grad();
      for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g * (sigmoid(x[i]) - label_copy[i]);
    });
  }
  return result;
}

Tensor sigmoid_bce(const Tensor& logit, double label) {
  const double labels[1] = {label};
  return sigmoid_bce(logit.rank() == 1 ? logit : reshape(logit, {1}), labels);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace muco::grad
