#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "muco/grad/ops.hpp"
#include "muco/proto/prototypes.hpp"

using namespace muco;

namespace {

double row_norm(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
  return std::sqrt(s);
}

// Two predefined classes, no latent classes, 6 sigma apart.
SyntheticData two_class_data(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.predefined = 2;
  spec.latent = 0;
  spec.latent_rate = 0.0;
  spec.correlation_rate = 0.0;
  spec.sentences = 120;
  spec.dim = 8;
  spec.seed = seed;
  return generate_synthetic(spec);
}

std::vector<LabeledExample> entity_examples(const Corpus& corpus) {
  std::vector<LabeledExample> out;
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string c = tag_class(s.tags[i]);
      if (!c.empty()) out.push_back({&s, i, c});
    }
  }
  return out;
}

double accuracy(const std::vector<LabeledExample>& examples, const Encoder& enc,
                const PrototypeTable& table, const std::vector<std::string>& classes) {
  std::size_t hit = 0;
  for (const auto& ex : examples) hit += classify(ex, enc, table, classes).predicted_class() == ex.label;
  return static_cast<double>(hit) / static_cast<double>(examples.size());
}

}  // namespace

TEST(InitPrototypes, DeterministicUnitNormDefaultScale) {
  Rng a(7);
  Rng b(7);
  const PrototypeTable t1 = PrototypeTable::init({"A", "B", "C"}, 6, a);
  const PrototypeTable t2 = PrototypeTable::init({"A", "B", "C"}, 6, b);
  EXPECT_TRUE(std::equal(t1.vectors().values().begin(), t1.vectors().values().end(),
                         t2.vectors().values().begin()));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(row_norm(t1.vectors(), r), 1.0, 1e-9);
  EXPECT_EQ(t1.scale_value(), 10.0);
}

TEST(InitPrototypes, DuplicateNamesRejected) {
  Rng rng(1);
  EXPECT_THROW(PrototypeTable::init({"A", "A"}, 3, rng), std::invalid_argument);
  PrototypeTable t = PrototypeTable::init({"A"}, 3, rng);
  EXPECT_THROW(t.append({"A"}, rng), std::invalid_argument);
}

TEST(PrototypeTable, ScaleClampedAndRowsRenormalized) {
  Rng rng(2);
  PrototypeTable t = PrototypeTable::init({"A", "B"}, 4, rng);
  Tensor s = t.scale();
  s.mutable_values()[0] = -3.0;
  t.project();
  EXPECT_EQ(t.scale_value(), kMinScale);
  Tensor v = t.vectors();
  for (auto& x : v.mutable_values()) x *= 3.0;
  t.project();
  for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(row_norm(t.vectors(), r), 1.0, 1e-12);
}

TEST(PrototypeTable, SaveLoadRoundTrip) {
  fixture::TempDir dir("proto");
  Rng rng(3);
  PrototypeTable t = PrototypeTable::init({"A", "B", "o_1"}, 5, rng);
  t.set_scale(7.25);
  t.save(dir / "p.txt");
  const PrototypeTable back = PrototypeTable::load(dir / "p.txt");
  EXPECT_EQ(back.classes(), t.classes());
  EXPECT_EQ(back.scale_value(), 7.25);
  EXPECT_TRUE(std::equal(t.vectors().values().begin(), t.vectors().values().end(),
                         back.vectors().values().begin()));
  EXPECT_EQ(fixture::read_file(dir / "p.txt").substr(0, 2), "5 ");
}

TEST(Distance, Examples) {
  const Tensor h = Tensor::vector({0.3, -1.2, 2.0});
  EXPECT_NEAR(distance(h, h).item(), -1.0, 1e-12);
  EXPECT_NEAR(distance(Tensor::vector({1, 0}), Tensor::vector({0, 4})).item(), 0.0, 1e-12);
  const Tensor p = Tensor::vector({1.0, 0.5, -0.7});
  EXPECT_NEAR(distance(grad::scale(h, 4.2), p).item(), distance(h, p).item(), 1e-12);
}

TEST(Distance, ZeroNormRejected) {
  EXPECT_THROW(distance(Tensor::vector({0, 0}), Tensor::vector({1, 0})), grad::DegenerateInputError);
}

TEST(Distance, RangeProperty) {
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(5);
    std::vector<double> b(5);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    const double d = distance(Tensor::vector(a), Tensor::vector(b)).item();
    EXPECT_GE(d, -1.0 - 1e-9);
    EXPECT_LE(d, 1.0 + 1e-9);
  }
}

TEST(ProtoLoss, EquidistantTwoClassesGiveLn2) {
  Rng rng(5);
  PrototypeTable t = PrototypeTable::init({"A", "B"}, 2, rng);
  Tensor v = t.vectors();
  auto vals = v.mutable_values();
  vals[0] = 1.0; vals[1] = 0.0; vals[2] = 0.0; vals[3] = 1.0;
  const Tensor h = Tensor::matrix(1, 2, {1.0, 1.0});
  const Tensor logits = class_logits(h, t, {0, 1}, false);
  EXPECT_NEAR(grad::softmax_xent(logits, Tensor::matrix(1, 2, {1, 0})).item(), std::log(2.0), 1e-12);
}

TEST(ProtoLoss, FourClassFloorAndCeiling) {
  // Perfect unscaled logits: +1 on the true class, -1 elsewhere.
  const double e = std::exp(1.0);
  const double ceiling = e / (e + 3.0 / e);
  const Tensor logits = Tensor::matrix(1, 4, {1, -1, -1, -1});
  const double loss = grad::softmax_xent(logits, Tensor::matrix(1, 4, {1, 0, 0, 0})).item();
  EXPECT_NEAR(loss, -std::log(ceiling), 1e-12);
  EXPECT_NEAR(loss, std::log(1.0 + 3.0 * std::exp(-2.0)), 1e-12);
  const auto p = grad::softmax(std::vector<double>{1, -1, -1, -1});
  EXPECT_NEAR(p[0], ceiling, 1e-12);
  const auto p10 = grad::softmax(std::vector<double>{10, -10, -10, -10});
  EXPECT_GT(p10[0], 0.999);
  EXPECT_NEAR(p10[0], std::exp(10.0) / (std::exp(10.0) + 3.0 * std::exp(-10.0)), 1e-12);
}

TEST(ProtoLoss, PerfectPrototypeHitsFloorThroughModel) {
  Rng rng(6);
  PrototypeTable t = PrototypeTable::init({"A", "B", "C", "D"}, 2, rng);
  // A at +x, the others at -x: cosines +1 and -1 for h on +x.
  Tensor v = t.vectors();
  auto vals = v.mutable_values();
  const double rows[4][2] = {{1, 0}, {-1, 0}, {-1, 0}, {-1, 0}};
  for (int r = 0; r < 4; ++r) { vals[2 * r] = rows[r][0]; vals[2 * r + 1] = rows[r][1]; }
  const Tensor logits = class_logits(Tensor::matrix(1, 2, {2.5, 0.0}), t, {0, 1, 2, 3}, false);
  EXPECT_NEAR(grad::softmax_xent(logits, Tensor::matrix(1, 4, {1, 0, 0, 0})).item(),
              std::log(1.0 + 3.0 * std::exp(-2.0)), 1e-12);
}

TEST(ProtoLoss, LabelOutsideSubsetRejected) {
  Rng rng(7);
  const Encoder enc = Encoder::create(fixture::vocab_of({"a"}), fixture::small_config(), rng);
  const PrototypeTable t = PrototypeTable::init({"A", "B"}, 5, rng);
  const Sentence s = fixture::sentence({"a"});
  EXPECT_THROW(proto_loss({&s, 0, "C"}, enc, t, {"A", "B"}, false), std::invalid_argument);
  EXPECT_THROW(proto_loss({&s, 0, "B"}, enc, t, {"A"}, false), std::invalid_argument);
}

TEST(ProbabilityCeiling, RandomLogitsInUnitInterval) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t k : {2u, 3u, 4u, 7u, 10u}) {
    const double e = std::exp(1.0);
    const double ceiling = e / (e + static_cast<double>(k - 1) / e);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> logits(k);
      for (auto& x : logits) x = u(rng);
      const auto p = grad::softmax(logits);
      EXPECT_LE(*std::max_element(p.begin(), p.end()), ceiling + 1e-12);
      EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    }
  }
}

TEST(ScaleMonotonicity, ArgmaxProbabilityIncreasesWithScale) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(5);
    for (auto& x : logits) x = u(rng);
    const std::size_t best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    double prev = 0.0;
    for (double s = 0.25; s <= 6.0; s += 0.25) {
      std::vector<double> scaled = logits;
      for (auto& x : scaled) x *= s;
      const double p = grad::softmax(scaled)[best];
      EXPECT_GT(p, prev);
      prev = p;
    }
  }
}

TEST(Classify, SingleClassHasProbabilityOne) {
  Rng rng(10);
  const Encoder enc = Encoder::create(fixture::vocab_of({"a"}), fixture::small_config(), rng);
  const PrototypeTable t = PrototypeTable::init({"A", "B"}, 5, rng);
  const Sentence s = fixture::sentence({"a"});
  const ClassifierOutput out = classify({&s, 0, ""}, enc, t, {"B"});
  ASSERT_EQ(out.probabilities.size(), 1u);
  EXPECT_DOUBLE_EQ(out.probabilities[0], 1.0);
  EXPECT_EQ(out.predicted_class(), "B");
}

TEST(Classify, CoincidingPrototypeWins) {
  Rng rng(11);
  const Encoder enc = Encoder::create(fixture::vocab_of({"a"}), fixture::small_config(3, 3, 0), rng);
  const Sentence s = fixture::sentence({"a"});
  const Tensor h = enc.encode(s, 0);
  PrototypeTable t = PrototypeTable::init({"A", "B", "C"}, 3, rng);
  // B is h, A and C span the orthogonal complement.
  std::vector<double> u(h.values().begin(), h.values().end());
  const double n = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  for (auto& x : u) x /= n;
  std::vector<double> a{-u[1], u[0], 0.0};
  const double an = std::hypot(a[0], a[1]);
  for (auto& x : a) x /= an;
  const std::vector<double> c{u[1] * a[2] - u[2] * a[1], u[2] * a[0] - u[0] * a[2],
                              u[0] * a[1] - u[1] * a[0]};
  Tensor v = t.vectors();
  auto vals = v.mutable_values();
  for (int i = 0; i < 3; ++i) { vals[i] = a[i]; vals[3 + i] = u[i]; vals[6 + i] = c[i]; }
  const ClassifierOutput out = classify({&s, 0, ""}, enc, t, {"A", "B", "C"});
  EXPECT_EQ(out.predicted_class(), "B");
}

TEST(Classify, PermutationEquivariance) {
  Rng rng(12);
  const Encoder enc = Encoder::create(fixture::vocab_of({"a", "b"}), fixture::small_config(), rng);
  const PrototypeTable t = PrototypeTable::init({"A", "B", "C", "D"}, 5, rng);
  const Sentence s = fixture::sentence({"a", "b"});
  const std::vector<std::string> order{"A", "B", "C", "D"};
  const ClassifierOutput base = classify({&s, 1, ""}, enc, t, order);
  std::vector<std::string> perm = order;
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const ClassifierOutput out = classify({&s, 1, ""}, enc, t, perm);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const std::size_t j = std::find(order.begin(), order.end(), perm[i]) - order.begin();
      EXPECT_DOUBLE_EQ(out.probabilities[i], base.probabilities[j]);
    }
    EXPECT_EQ(out.predicted_class(), base.predicted_class());
  }
}

TEST(Classify, ProbabilitiesSumToOne) {
  Rng rng(13);
  const Encoder enc = Encoder::create(fixture::vocab_of({"a", "b"}), fixture::small_config(), rng);
  const PrototypeTable t = PrototypeTable::init({"A", "B", "C"}, 5, rng);
  const Sentence s = fixture::sentence({"a", "b"});
  const auto p = classify({&s, 0, ""}, enc, t, {"A", "B", "C"}).probabilities;
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
}

TEST(Classify, ArgmaxInvariantToRescaledRepresentation) {
  Rng rng(14);
  std::normal_distribution<double> n(0.0, 1.0);
  const PrototypeTable t = PrototypeTable::init({"A", "B", "C", "D"}, 6, rng);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h(6);
    for (auto& x : h) x = n(rng);
    const auto base = class_logits(Tensor::matrix(1, 6, h), t, {0, 1, 2, 3}, true);
    const double alpha = 0.01 + 50.0 * std::abs(n(rng));
    for (auto& x : h) x *= alpha;
    const auto scaled = class_logits(Tensor::matrix(1, 6, h), t, {0, 1, 2, 3}, true);
    auto arg = [](const Tensor& l) {
      return std::max_element(l.values().begin(), l.values().end()) - l.values().begin();
    };
    EXPECT_EQ(arg(base), arg(scaled));
  }
}

TEST(TrainStep1, SeparableClassesReachFullAccuracy) {
  const SyntheticData data = two_class_data(21);
  const auto examples = entity_examples(data.corpus);
  ASSERT_GT(examples.size(), 20u);
  Rng rng(1);
  Encoder enc = Encoder::create(data.embeddings, fixture::small_config(8, 16, 0), rng);
  PrototypeTable t = PrototypeTable::init({"C0", "C1"}, 16, rng);
  Step1Config cfg;
  cfg.epochs = 50;
  cfg.seed = 1;
  const TrainingLog log = train_step1(examples, enc, t, cfg);
  EXPECT_EQ(log.epoch_loss.size(), 50u);
  EXPECT_DOUBLE_EQ(accuracy(examples, enc, t, {"C0", "C1"}), 1.0);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(row_norm(t.vectors(), r), 1.0, 1e-6);
}

TEST(TrainStep1, FullBatchLossIsNonIncreasing) {
  const SyntheticData data = two_class_data(22);
  const auto examples = entity_examples(data.corpus);
  Rng rng(2);
  Encoder enc = Encoder::create(data.embeddings, fixture::small_config(8, 16, 0), rng);
  PrototypeTable t = PrototypeTable::init({"C0", "C1"}, 16, rng);
  Step1Config cfg;
  cfg.epochs = 40;
  cfg.batch_size = 0;
  cfg.learning_rate = 0.02;
  const TrainingLog log = train_step1(examples, enc, t, cfg);
  for (std::size_t i = 1; i < log.epoch_loss.size(); ++i) {
    EXPECT_LE(log.epoch_loss[i], log.epoch_loss[i - 1] + 1e-12) << "epoch " << i;
  }
}

TEST(TrainStep1, ZeroEpochsLeaveEncoderUnchanged) {
  const SyntheticData data = two_class_data(23);
  const auto examples = entity_examples(data.corpus);
  Rng rng(3);
  Encoder enc = Encoder::create(data.embeddings, fixture::small_config(8, 8, 1), rng);
  const Encoder before = enc.snapshot();
  PrototypeTable t = PrototypeTable::init({"C0", "C1"}, 8, rng);
  Step1Config cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(train_step1(examples, enc, t, cfg).epoch_loss.empty());
  EXPECT_TRUE(enc.same_values(before));
}

TEST(TrainStep1, SameSeedSameCurves) {
  const SyntheticData data = two_class_data(24);
  const auto examples = entity_examples(data.corpus);
  auto run = [&] {
    Rng rng(4);
    Encoder enc = Encoder::create(data.embeddings, fixture::small_config(8, 8, 1), rng);
    PrototypeTable t = PrototypeTable::init({"C0", "C1"}, 8, rng);
    Step1Config cfg;
    cfg.epochs = 5;
    cfg.seed = 9;
    return train_step1(examples, enc, t, cfg).epoch_loss;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainStep1, RejectsEmptyAndUnknownLabels) {
  Rng rng(5);
  Encoder enc = Encoder::create(fixture::vocab_of({"a"}), fixture::small_config(), rng);
  PrototypeTable t = PrototypeTable::init({"A"}, 5, rng);
  EXPECT_THROW(train_step1({}, enc, t, Step1Config{}), std::invalid_argument);
  const Sentence s = fixture::sentence({"a"}, {"B-Z"});
  EXPECT_THROW(train_step1({{&s, 0, "Z"}}, enc, t, Step1Config{}), std::out_of_range);
}

TEST(FitPrototypes, UnitNormAfterEveryStep) {
  const SyntheticData data = two_class_data(25);
  const auto examples = entity_examples(data.corpus);
  Rng rng(6);
  Encoder enc = Encoder::create(data.embeddings, fixture::small_config(8, 8, 1), rng);
  PrototypeTable t = PrototypeTable::init({"C0", "C1"}, 8, rng);
  Step1Config cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.5;
  for (int round = 0; round < 5; ++round) {
    train_step1(examples, enc, t, cfg);
    for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(row_norm(t.vectors(), r), 1.0, 1e-6);
  }
}
