#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "muco/corpus/synthetic.hpp"
#include "muco/eval/metrics.hpp"
#include "muco/joint/joint.hpp"
#include "muco/miner/miner.hpp"

namespace muco {

enum class Method { Muco, SingleO, Ws };

std::string method_name(Method method);
/// Accepts muco, single_o, single_o_baseline, ws and ws_baseline.
Method parse_method(const std::string& name);

struct ExperimentConfig {
  // Data: a synthetic spec (file or synth.* keys) or corpus + embeddings files.
  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path latent;  // optional sidecar for mining reports

  double split_fraction = 1.0 / 3.0;
  std::vector<std::size_t> ks{1, 5};
  std::vector<Method> methods{Method::Muco, Method::SingleO, Method::Ws};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  bool restrict_k = true;  // restricts K to {1, 5}

  EncoderConfig encoder;
  Step1Config step1;
  Step2Config step2;
  double gamma = kDefaultGamma;
  std::size_t target_r = 0;  // nonzero calibrates gamma instead
  std::size_t min_size = kDefaultMinSize;
  std::size_t max_candidates = kDefaultMaxCandidates;
  std::size_t ws_clusters = 0;  // 0 matches the group classifier's count

  TrainingSchedule pretrain = make_schedule(Stage::PretrainBase, 100, 0.05);
  TrainingSchedule finetune = make_schedule(Stage::FinetuneFewShot, 100, 0.01);
  double initial_scale = kDefaultScale;
  bool reuse_scale = true;

  std::string source;  // config text as read, for the fingerprint

  void validate() const;
  std::string fingerprint() const;
};

/// key = value lines; unknown keys are errors. Relative paths resolve
/// against base_dir.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentData {
  Corpus corpus;
  EmbeddingTable embeddings;
  std::map<std::pair<std::size_t, std::size_t>, std::string> latent;  // empty if unknown
};
ExperimentData load_experiment_data(const ExperimentConfig& config);

struct RunRecord {
  Method method = Method::Muco;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  ScoreReport score;
  std::size_t mined_classes = 0;
  std::optional<MiningReport> mining;
};

struct ExperimentResult {
  ClassSplit split;
  std::vector<RunRecord> runs;  // sorted by method, K, seed
  std::string fingerprint;
};

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* progress = nullptr);
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::ostream* progress = nullptr);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds
};
MeanStd macro_f1_summary(const ExperimentResult& result, Method method, std::size_t k);

/// scores.csv: one row per (method, K, seed, class), a macro row per run,
/// then MEAN and STD rows per (method, K).
void write_scores_csv(const ExperimentResult& result, const std::filesystem::path& path);
/// mining.csv: one row per mining run.
void write_mining_csv(const ExperimentResult& result, const std::filesystem::path& path);

}  // namespace muco
