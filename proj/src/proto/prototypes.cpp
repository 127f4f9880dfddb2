#include "muco/proto/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "muco/grad/ops.hpp"
#include "muco/grad/sgd.hpp"

namespace muco {

namespace {

std::vector<double> random_unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        v[r * dim + c] = normal(rng);
        sq += v[r * dim + c] * v[r * dim + c];
      }
    } while (sq <= 0.0);
    const double norm = std::sqrt(sq);
    for (std::size_t c = 0; c < dim; ++c) v[r * dim + c] /= norm;
  }
  return v;
}

void check_unique(const std::vector<std::string>& names) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate class name '" + n + "'");
  }
}

}  // namespace

PrototypeTable PrototypeTable::init(const std::vector<std::string>& classes, std::size_t dim,
                                    Rng& rng, double scale) {
  if (classes.empty()) throw std::invalid_argument("init_prototypes: no classes");
  if (dim == 0) throw std::invalid_argument("init_prototypes: zero dimension");
  check_unique(classes);
  PrototypeTable table;
  table.classes_ = classes;
  table.vectors_ = Tensor({classes.size(), dim}, random_unit_rows(rng, classes.size(), dim), true);
  table.scale_ = Tensor::scalar(scale, true);
  table.set_scale(scale);
  return table;
}

void PrototypeTable::append(const std::vector<std::string>& classes, Rng& rng) {
  if (classes.empty()) return;
  std::vector<std::string> all = classes_;
  all.insert(all.end(), classes.begin(), classes.end());
  check_unique(all);
  const auto fresh = random_unit_rows(rng, classes.size(), dim());
  std::vector<double> values(vectors_.values().begin(), vectors_.values().end());
  values.insert(values.end(), fresh.begin(), fresh.end());
  classes_ = std::move(all);
  vectors_ = Tensor({classes_.size(), dim()}, std::move(values), true);
}

std::size_t PrototypeTable::index(const std::string& name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw std::out_of_range("no prototype for class '" + name + "'");
  return static_cast<std::size_t>(it - classes_.begin());
}

bool PrototypeTable::contains(const std::string& name) const {
  return std::find(classes_.begin(), classes_.end(), name) != classes_.end();
}

std::vector<std::size_t> PrototypeTable::indices(const std::vector<std::string>& names) const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(index(n));
  return out;
}

void PrototypeTable::set_scale(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("scale must be positive");
  scale_.mutable_values()[0] = s;
}

void PrototypeTable::project() {
  const std::size_t d = dim();
  auto v = vectors_.mutable_values();
  for (std::size_t r = 0; r < size(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += v[r * d + c] * v[r * d + c];
    const double norm = std::sqrt(sq);
    if (!(norm > grad::kNormEpsilon)) {
      throw grad::DegenerateInputError("prototype '" + classes_[r] + "' collapsed to zero");
    }
    for (std::size_t c = 0; c < d; ++c) v[r * d + c] /= norm;
  }
  auto s = scale_.mutable_values();
  s[0] = std::max(s[0], kMinScale);
}

PrototypeTable PrototypeTable::clone() const {
  PrototypeTable copy;
  copy.classes_ = classes_;
  copy.vectors_ = vectors_.clone();
  copy.scale_ = scale_.clone();
  return copy;
}

void PrototypeTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write prototype file " + path.string());
  out << std::setprecision(17) << dim() << ' ' << scale_value() << '\n';
  for (std::size_t r = 0; r < size(); ++r) {
    out << classes_[r];
    for (std::size_t c = 0; c < dim(); ++c) out << ' ' << vectors_.at(r, c);
    out << '\n';
  }
}

PrototypeTable PrototypeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prototype file " + path.string());
  std::size_t dim = 0;
  double s = 0.0;
  if (!(in >> dim >> s) || dim == 0) {
    throw std::runtime_error("prototype file " + path.string() + ": bad header");
  }
  PrototypeTable table;
  std::vector<double> values;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name;
    fields >> name;
    std::size_t count = 0;
    double v = 0.0;
    while (fields >> v) {
      values.push_back(v);
      ++count;
    }
    if (count != dim) {
      throw std::runtime_error("prototype file: class '" + name + "' has " +
                               std::to_string(count) + " values, expected " +
                               std::to_string(dim));
    }
    table.classes_.push_back(name);
  }
  if (table.classes_.empty()) throw std::runtime_error("prototype file has no classes");
  check_unique(table.classes_);
  table.vectors_ = Tensor({table.classes_.size(), dim}, std::move(values), true);
  table.scale_ = Tensor::scalar(s, true);
  table.set_scale(s);
  return table;
}

Tensor distance(const Tensor& h, const Tensor& p) {
  return grad::neg_dot(grad::l2_normalize(h), grad::l2_normalize(p));
}

Tensor class_logits(const Tensor& hidden, const PrototypeTable& table,
                    const std::vector<std::size_t>& subset, bool scaled) {
  if (subset.empty()) throw std::invalid_argument("class_logits: empty class subset");
  const bool all_rows = subset.size() == table.size() &&
                        std::is_sorted(subset.begin(), subset.end()) &&
                        subset.back() == table.size() - 1;
  Tensor protos = all_rows ? table.vectors() : grad::gather_rows(table.vectors(), subset);
  Tensor cos = grad::matmul_nt(grad::l2_normalize(hidden), grad::l2_normalize(protos));
  return scaled ? grad::scale(cos, table.scale()) : cos;
}

Tensor proto_loss(const LabeledExample& example, const Encoder& encoder,
                  const PrototypeTable& table, const std::vector<std::string>& class_subset,
                  bool scaled) {
  auto it = std::find(class_subset.begin(), class_subset.end(), example.label);
  if (it == class_subset.end()) {
    throw std::invalid_argument("label '" + example.label + "' outside the class subset");
  }
  std::vector<double> target(class_subset.size(), 0.0);
  target[static_cast<std::size_t>(it - class_subset.begin())] = 1.0;
  Tensor h = encoder.encode(*example.sentence, example.index);
  Tensor logits = class_logits(h, table, table.indices(class_subset), scaled);
  return grad::softmax_xent(logits, Tensor::vector(std::move(target)));
}

ClassifierOutput classify(const LabeledExample& example, const Encoder& encoder,
                          const PrototypeTable& table,
                          const std::vector<std::string>& class_subset) {
  grad::NoGradGuard guard;
  Tensor h = encoder.encode(*example.sentence, example.index);
  Tensor logits = class_logits(h, table, table.indices(class_subset), true);
  ClassifierOutput out;
  out.classes = class_subset;
  out.probabilities = grad::softmax(logits.values());
  out.predicted = static_cast<std::size_t>(
      std::max_element(logits.values().begin(), logits.values().end()) - logits.values().begin());
  return out;
}

TrainingLog fit_prototypes(const std::vector<TrainingUnit>& units, Encoder& encoder,
                           PrototypeTable& table, const std::vector<std::size_t>& subset,
                           const FitOptions& options) {
  if (units.empty()) throw std::invalid_argument("training set is empty");
  const std::size_t k = subset.size();
  for (const auto& u : units) {
    if (u.count == 0 || u.targets.size() != u.count * k) {
      throw grad::DimensionError("training unit targets do not match the class subset");
    }
  }
  std::vector<Tensor> params;
  if (options.train_encoder) params = encoder.parameters();
  if (options.train_prototypes) params.push_back(table.vectors());
  if (options.scaled && options.train_scale) params.push_back(table.scale());
  for (auto& p : params) p.zero_grad();
  grad::Sgd opt(params, options.learning_rate);

  // Only the tensors being optimized may accumulate gradients.
  std::vector<std::pair<Tensor, bool>> saved_flags;
  auto hold = [&](const Tensor& t, bool trainable) {
    saved_flags.emplace_back(t, t.requires_grad());
    Tensor handle = t;
    handle.set_requires_grad(trainable && t.requires_grad());
  };
  for (const auto& p : encoder.parameters()) hold(p, options.train_encoder);
  hold(table.vectors(), options.train_prototypes);
  hold(table.scale(), options.scaled && options.train_scale);

  const std::size_t d = table.dim();
  std::vector<double> frozen;
  for (std::size_t r : options.frozen_rows) {
    if (r >= table.size()) throw std::out_of_range("frozen prototype row out of range");
    for (std::size_t c = 0; c < d; ++c) frozen.push_back(table.vectors().at(r, c));
  }

  Rng rng(options.seed);
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = options.batch_units == 0 ? units.size() : options.batch_units;
  TrainingLog log;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<std::size_t> windows;
      std::vector<double> targets;
      std::size_t n = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& u = units[order[i]];
        windows.insert(windows.end(), u.windows.begin(), u.windows.end());
        targets.insert(targets.end(), u.targets.begin(), u.targets.end());
        n += u.count;
      }
      grad::Tape tape;
      Tensor hidden = encoder.encode_windows(windows);
      Tensor logits = class_logits(hidden, table, subset, options.scaled);
      Tensor loss = grad::softmax_xent(logits, Tensor::matrix(n, k, std::move(targets)));
      tape.backward(loss);
      opt.step();
      if (!frozen.empty()) {
        Tensor rows = table.vectors();
        auto v = rows.mutable_values();
        for (std::size_t q = 0; q < options.frozen_rows.size(); ++q)
          std::copy_n(frozen.begin() + q * d, d, v.begin() + options.frozen_rows[q] * d);
      }
      table.project();
      total += loss.item();
      ++steps;
    }
    log.epoch_loss.push_back(total / static_cast<double>(steps));
  }
  for (auto& [t, flag] : saved_flags) t.set_requires_grad(flag);
  return log;
}

TrainingLog train_step1(const std::vector<LabeledExample>& examples, Encoder& encoder,
                        PrototypeTable& table, const Step1Config& config) {
  if (examples.empty()) throw std::invalid_argument("train_step1: empty example set");
  const std::size_t k = table.size();
  std::vector<TrainingUnit> units;
  units.reserve(examples.size());
  for (const auto& ex : examples) {
    TrainingUnit u;
    u.windows = encoder.window_ids(encoder.token_ids(*ex.sentence), ex.index);
    u.targets.assign(k, 0.0);
    u.targets[table.index(ex.label)] = 1.0;
    u.count = 1;
    units.push_back(std::move(u));
  }
  std::vector<std::size_t> subset(k);
  std::iota(subset.begin(), subset.end(), 0);
  FitOptions options;
  options.epochs = config.epochs;
  options.learning_rate = config.learning_rate;
  options.batch_units = config.batch_size;
  options.seed = config.seed;
  options.scaled = false;
  return fit_prototypes(units, encoder, table, subset, options);
}

}  // namespace muco
