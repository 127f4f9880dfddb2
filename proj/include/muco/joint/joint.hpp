#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "muco/corpus/corpus.hpp"
#include "muco/miner/miner.hpp"
#include "muco/proto/prototypes.hpp"

namespace muco {

/// Name of the catch-all prototype for tokens left in O.
inline constexpr const char* kCatchAllClass = "O";

/// Corpus whose O tokens may carry mined tags, with the soft row of every
/// mined token.
struct JointCorpus {
  Corpus corpus;
  std::vector<std::string> mined_classes;       // o_1..o_r
  std::map<TokenRef, std::vector<double>> soft;  // rows over mined_classes
};

/// Writes B-o_k/I-o_k over assigned spans. Throws if an assigned token is not
/// tagged O.
JointCorpus relabel(const Corpus& corpus, const GroupAssignment& assignment);

/// Corpus with every mined tag turned back into O.
Corpus strip_mined(const Corpus& corpus);

/// Target row over table classes for one token: one-hot for predefined tags,
/// the soft row on mined coordinates for mined tokens, one-hot on the
/// catch-all prototype otherwise. Throws when the needed prototype is missing.
std::vector<double> joint_target(const JointCorpus& data, TokenRef token,
                                 const PrototypeTable& table);

/// Cross-entropy of softmax(s * cos(h, p)) over every prototype in the table
/// against the given target row. scaled = false uses s = 1.
Tensor joint_loss(const Sentence& sentence, std::size_t index, const std::vector<double>& target,
                  const Encoder& encoder, const PrototypeTable& table, bool scaled = true);
Tensor joint_loss(const JointCorpus& data, TokenRef token, const Encoder& encoder,
                  const PrototypeTable& table, bool scaled = true);

enum class Stage { PretrainBase, FinetuneFewShot };

struct TrainingSchedule {
  Stage stage = Stage::PretrainBase;
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::size_t batch_sentences = 16;
  std::uint64_t seed = 0;
  // Few-shot classes and their cap; only used when fine-tuning. Spans of a
  // few-shot class past the first k are left out of the loss.
  std::vector<std::string> few_shot;
  std::size_t k = 0;
  bool train_encoder = true;
  bool train_base_prototypes = true;
  bool train_scale = true;
};

inline TrainingSchedule make_schedule(Stage stage, std::size_t epochs, double learning_rate) {
  TrainingSchedule s;
  s.stage = stage;
  s.epochs = epochs;
  s.learning_rate = learning_rate;
  return s;
}

/// Scaled joint training over the listed sentences with every prototype of
/// the table in the softmax.
TrainingLog train_joint(const JointCorpus& data, const std::vector<std::size_t>& sentences,
                        Encoder& encoder, PrototypeTable& table, const TrainingSchedule& schedule);

/// Per-token argmax over all prototypes, catch-all mapped to O, then BIO.
std::vector<std::string> predict_sentence(const Sentence& sentence, const Encoder& encoder,
                                          const PrototypeTable& table);

/// Trained model bundle: encoder.txt, prototypes.txt and config.txt.
struct ModelBundle {
  Encoder encoder;
  PrototypeTable table;
  std::string config;
};
void save_model(const ModelBundle& model, const std::filesystem::path& dir);
ModelBundle load_model(const std::filesystem::path& dir);

}  // namespace muco
