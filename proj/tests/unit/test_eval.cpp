#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "muco/eval/experiment.hpp"
#include "muco/eval/metrics.hpp"
#include "muco/util/config.hpp"

using namespace muco;

namespace {

using Tags = std::vector<std::vector<std::string>>;

const Tags kGold{{"B-PER", "I-PER", "O", "B-LOC"}, {"O", "B-ORG", "O"}, {"B-LOC", "O"}};

Tags random_tags(std::mt19937_64& rng, const Tags& shape) {
  static const std::vector<std::string> pool{"O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-o_1", "I-o_1", "B-o_2"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Tags out;
  for (const auto& s : shape) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < s.size(); ++i) row.push_back(pool[pick(rng)]);
    out.push_back(row);
  }
  return out;
}

void expect_same(const ScoreReport& a, const ScoreReport& b) {
  ASSERT_EQ(a.classes.size(), b.classes.size());
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    EXPECT_EQ(a.classes[i].f1, b.classes[i].f1);
    EXPECT_EQ(a.classes[i].precision, b.classes[i].precision);
    EXPECT_EQ(a.classes[i].recall, b.classes[i].recall);
  }
  EXPECT_EQ(a.macro_f1, b.macro_f1);
}

GroupAssignment assignment_of(const std::vector<std::size_t>& hard, std::size_t classes) {
  GroupAssignment a;
  for (std::size_t c = 0; c < classes; ++c) a.class_names.push_back("o_" + std::to_string(c + 1));
  for (std::size_t i = 0; i < hard.size(); ++i) a.tokens.push_back({i, 0});
  a.hard = hard;
  return a;
}

std::map<std::pair<std::size_t, std::size_t>, std::string> latent_of(const std::vector<std::string>& labels) {
  std::map<std::pair<std::size_t, std::size_t>, std::string> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[{i, 0}] = labels[i];
  return m;
}

const char* kTinyConfig = R"(synth.predefined = 3
synth.latent = 2
synth.sentences = 90
synth.dim = 6
seeds = 1,2
k = 1
hidden_dim = 8
window = 0
step1_epochs = 2
step2_epochs = 2
pretrain_epochs = 2
finetune_epochs = 3
max_candidates = 200
)";

}  // namespace

TEST(Score, PerfectPrediction) {
  const ScoreReport r = score(kGold, kGold, {"PER", "LOC", "ORG"});
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
    EXPECT_EQ(c.f1, 1.0);
  }
  EXPECT_EQ(r.classes[1].gold, 2u);
  EXPECT_EQ(r.macro_f1, 1.0);
}

TEST(Score, AllOutsideGivesZero) {
  Tags none;
  for (const auto& s : kGold) none.emplace_back(s.size(), "O");
  const ScoreReport r = score(kGold, none, {"PER", "LOC"});
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.recall, 0.0);
    EXPECT_EQ(c.precision, 0.0);
    EXPECT_EQ(c.f1, 0.0);
  }
}

TEST(Score, MinedPredictionOnGoldOIsHarmless) {
  Tags pred = kGold;
  pred[1][0] = "B-o_3";
  pred[1][2] = "B-o_1";
  expect_same(score(kGold, pred, {"PER", "LOC", "ORG"}), score(kGold, kGold, {"PER", "LOC", "ORG"}));
}

TEST(Score, ExactSpanMatchAndCounts) {
  Tags pred = kGold;
  pred[0][1] = "O";  // PER span now [0,1): boundary wrong
  const ScoreReport r = score(kGold, pred, {"PER"});
  EXPECT_EQ(r.classes[0].predicted, 1u);
  EXPECT_EQ(r.classes[0].correct, 0u);
  EXPECT_EQ(r.classes[0].f1, 0.0);

  Tags half = kGold;
  half[2][0] = "O";
  const ScoreReport l = score(kGold, half, {"LOC"});
  EXPECT_EQ(l.classes[0].precision, 1.0);
  EXPECT_EQ(l.classes[0].recall, 0.5);
  EXPECT_NEAR(l.classes[0].f1, 2.0 / 3.0, 1e-15);
}

TEST(Score, MisalignedInputRejected) {
  Tags short_pred = kGold;
  short_pred[0].pop_back();
  EXPECT_THROW(score(kGold, short_pred, {"PER"}), std::invalid_argument);
  EXPECT_THROW(score(kGold, Tags{}, {"PER"}), std::invalid_argument);
}

TEST(Score, MappingRuleEquivalenceProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Tags gold = random_tags(rng, kGold);
    const Tags pred = random_tags(rng, kGold);
    Tags replaced = pred;
    for (auto& s : replaced)
      for (auto& t : s)
        if (is_mined_tag(t)) t = "O";
    expect_same(score(gold, pred, {"PER", "LOC"}), score(gold, replaced, {"PER", "LOC"}));
  }
}

TEST(Score, InvariantToClassAndSentenceOrder) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Tags gold = random_tags(rng, kGold);
    const Tags pred = random_tags(rng, kGold);
    const ScoreReport base = score(gold, pred, {"PER", "LOC"});
    EXPECT_GE(base.macro_f1, 0.0);
    EXPECT_LE(base.macro_f1, 1.0);
    EXPECT_EQ(score(gold, pred, {"LOC", "PER"}).macro_f1, base.macro_f1);
    std::vector<std::size_t> order(gold.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Tags g2, p2;
    for (std::size_t i : order) {
      g2.push_back(gold[i]);
      p2.push_back(pred[i]);
    }
    EXPECT_EQ(score(g2, p2, {"PER", "LOC"}).macro_f1, base.macro_f1);
    for (const auto& c : base.classes) {
      const double expected = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
      EXPECT_NEAR(c.f1, expected, 1e-15);
    }
  }
}

TEST(Ari, KnownValues) {
  EXPECT_EQ(adjusted_rand_index({"a", "a", "b", "b"}, {"x", "x", "y", "y"}), 1.0);
  EXPECT_EQ(adjusted_rand_index({"a", "a", "b", "b"}, {"y", "y", "x", "x"}), 1.0);
  // Contingency [[1,1],[1,1]]: index 0, expected 2/3, max 2 -> -0.5.
  EXPECT_NEAR(adjusted_rand_index({"a", "a", "b", "b"}, {"x", "y", "x", "y"}), -0.5, 1e-15);
  EXPECT_THROW(adjusted_rand_index({"a"}, {"a", "b"}), std::invalid_argument);
}

TEST(Ari, RenamingInvariantAndBounded) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> a, b, renamed;
    for (int i = 0; i < 30; ++i) {
      a.push_back(std::to_string(pick(rng)));
      b.push_back(std::to_string(pick(rng)));
      renamed.push_back("z" + std::to_string(3 - std::stoi(b.back())));
    }
    const double ari = adjusted_rand_index(a, b);
    EXPECT_GE(ari, -1.0);
    EXPECT_LE(ari, 1.0);
    EXPECT_NEAR(adjusted_rand_index(a, renamed), ari, 1e-15);
  }
}

TEST(Ari, ShuffledLabelsAverageNearZero) {
  std::vector<std::string> truth;
  for (int i = 0; i < 1000; ++i) truth.push_back(std::to_string(i % 5));
  std::mt19937_64 rng(8);
  double total = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> shuffled = truth;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    total += adjusted_rand_index(truth, shuffled);
  }
  EXPECT_NEAR(total / 100.0, 0.0, 0.05);
}

TEST(MiningQuality, ExactPartition) {
  const MiningReport r = mining_quality(assignment_of({0, 0, 1, 1, kIrrelevant}, 2),
                                        latent_of({"U0", "U0", "U1", "U1", "-"}));
  EXPECT_EQ(r.classes, 2u);
  EXPECT_EQ(r.ari, 1.0);
  EXPECT_EQ(r.ic, (std::vector<double>{1.0, 1.0}));
  EXPECT_NEAR(r.irrelevant_fraction, 0.2, 1e-15);
  EXPECT_EQ(r.id, 1.0);
}

TEST(MiningQuality, MergedClassHasHalfCorrectness) {
  const MiningReport r = mining_quality(assignment_of({0, 0, 0, 0}, 1), latent_of({"U0", "U0", "U1", "U1"}));
  EXPECT_EQ(r.ic, std::vector<double>{0.5});
}

TEST(MiningQuality, MissingSidecarRowRejected) {
  EXPECT_THROW(mining_quality(assignment_of({0, 0, 1}, 2), latent_of({"U0", "U0"})), std::exception);
}

TEST(ExperimentConfig, ParsesKeysAndSynthetic) {
  const ExperimentConfig c = parse_experiment_config(kTinyConfig);
  ASSERT_TRUE(c.synthetic.has_value());
  EXPECT_EQ(c.synthetic->sentences, 90u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(c.ks, std::vector<std::size_t>{1});
  EXPECT_EQ(c.encoder.window, 0u);
  EXPECT_EQ(c.max_candidates, 200u);
  EXPECT_EQ(parse_experiment_config("synth.seed = 1\nseeds = 1..10\n").seeds.size(), 10u);
  EXPECT_EQ(parse_method("single_o_baseline"), Method::SingleO);
  EXPECT_EQ(parse_method("ws"), Method::Ws);
}

TEST(ExperimentConfig, FieldErrors) {
  auto message = [](const std::string& text) {
    try {
      parse_experiment_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("synth.seed = 1\nk = 3\n").find("k"), std::string::npos);
  EXPECT_TRUE(message("synth.seed = 1\nk = 3\nrestrict_k = false\n").empty());
  EXPECT_NE(message("synth.seed = 1\nbogus = 2\n").find("bogus"), std::string::npos);
  EXPECT_NE(message("synth.seed = 1\ngamma = 1.5\n").find("gamma"), std::string::npos);
  EXPECT_NE(message("k = 1\n").find("synthetic"), std::string::npos);
  EXPECT_NE(message("synth.bogus = 1\n").find("synthetic spec"), std::string::npos);
  EXPECT_THROW(parse_method("kmeans"), std::invalid_argument);
}

TEST(Experiment, RunsAllMethodsAndSummarizes) {
  const ExperimentResult r = run_experiment(parse_experiment_config(kTinyConfig));
  EXPECT_EQ(r.runs.size(), 6u);
  EXPECT_FALSE(r.split.few_shot.empty());
  for (const auto& run : r.runs) {
    EXPECT_EQ(run.score.classes.size(), r.split.few_shot.size());
    if (run.method == Method::SingleO) {
      EXPECT_EQ(run.mined_classes, 0u);
    }
  }
  const MeanStd s = macro_f1_summary(r, Method::Muco, 1);
  EXPECT_GE(s.mean, 0.0);
  EXPECT_LE(s.mean, 1.0);
  EXPECT_GE(s.std, 0.0);
}

TEST(Experiment, CsvBitReproducible) {
  fixture::TempDir dir("csv");
  const ExperimentConfig cfg = parse_experiment_config(kTinyConfig);
  for (const char* name : {"a", "b"}) {
    const ExperimentResult r = run_experiment(cfg);
    write_scores_csv(r, dir / (std::string(name) + "_scores.csv"));
    write_mining_csv(r, dir / (std::string(name) + "_mining.csv"));
  }
  const std::string scores = fixture::read_file(dir / "a_scores.csv");
  EXPECT_EQ(scores, fixture::read_file(dir / "b_scores.csv"));
  EXPECT_EQ(fixture::read_file(dir / "a_mining.csv"), fixture::read_file(dir / "b_mining.csv"));
  EXPECT_NE(scores.find("MEAN"), std::string::npos);
  EXPECT_NE(scores.find("STD"), std::string::npos);
}
