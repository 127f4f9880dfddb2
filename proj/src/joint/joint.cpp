#include "muco/joint/joint.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "muco/grad/ops.hpp"
#include "muco/util/config.hpp"

namespace muco {

namespace {

std::string where(TokenRef t) {
  return "sentence " + std::to_string(t.sentence) + " token " + std::to_string(t.index);
}

std::vector<std::size_t> all_rows(const PrototypeTable& table) {
  std::vector<std::size_t> rows(table.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

std::size_t require_prototype(const PrototypeTable& table, const std::string& cls, TokenRef t) {
  if (!table.contains(cls)) {
    throw std::invalid_argument("no prototype for class '" + cls + "' needed by " + where(t));
  }
  return table.index(cls);
}

}  // namespace

JointCorpus relabel(const Corpus& corpus, const GroupAssignment& assignment) {
  JointCorpus out;
  out.corpus = corpus;
  out.mined_classes = assignment.class_names;
  for (std::size_t p = 0; p < assignment.tokens.size(); ++p) {
    if (assignment.hard[p] == kIrrelevant) continue;
    const TokenRef t = assignment.tokens[p];
    if (t.sentence >= corpus.sentences.size() || t.index >= corpus.sentences[t.sentence].size()) {
      throw std::out_of_range("assignment references missing " + where(t));
    }
    if (corpus.sentences[t.sentence].tags[t.index] != kOutsideTag) {
      throw std::invalid_argument("assignment references " + where(t) + " tagged " +
                                  corpus.sentences[t.sentence].tags[t.index] + ", not O");
    }
    std::vector<double> row;
    if (p < assignment.soft.size() && !assignment.soft[p].empty()) {
      row = assignment.soft[p];
    } else {
      row.assign(assignment.class_count(), 0.0);
      row[assignment.hard[p]] = 1.0;
    }
    if (row.size() != assignment.class_count()) {
      throw grad::DimensionError("soft row of " + where(t) + " has " + std::to_string(row.size()) +
                                 " entries for " + std::to_string(assignment.class_count()) +
                                 " mined classes");
    }
    out.soft[t] = std::move(row);
  }
  for (const auto& [sentence, span] : assignment.spans()) {
    auto& tags = out.corpus.sentences[sentence].tags;
    for (std::size_t i = span.begin; i < span.end; ++i) {
      tags[i] = (i == span.begin ? "B-" : "I-") + span.cls;
    }
  }
  return out;
}

Corpus strip_mined(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& s : out.sentences)
    for (auto& tag : s.tags)
      if (is_mined_tag(tag)) tag = kOutsideTag;
  return out;
}

std::vector<double> joint_target(const JointCorpus& data, TokenRef token,
                                 const PrototypeTable& table) {
  const auto& sentence = data.corpus.sentences.at(token.sentence);
  const std::string cls = tag_class(sentence.tags.at(token.index));
  std::vector<double> target(table.size(), 0.0);
  if (cls.empty()) {
    target[require_prototype(table, kCatchAllClass, token)] = 1.0;
  } else if (is_mined_tag(sentence.tags[token.index])) {
    auto it = data.soft.find(token);
    if (it == data.soft.end()) throw std::invalid_argument("no soft row for mined " + where(token));
    for (std::size_t k = 0; k < data.mined_classes.size(); ++k) {
      target[require_prototype(table, data.mined_classes[k], token)] = it->second[k];
    }
  } else {
    target[require_prototype(table, cls, token)] = 1.0;
  }
  return target;
}

Tensor joint_loss(const Sentence& sentence, std::size_t index, const std::vector<double>& target,
                  const Encoder& encoder, const PrototypeTable& table, bool scaled) {
  if (target.size() != table.size()) {
    throw grad::DimensionError("target has " + std::to_string(target.size()) + " entries for " +
                               std::to_string(table.size()) + " prototypes");
  }
  const Tensor h = grad::reshape(encoder.encode(sentence, index), {1, encoder.hidden_dim()});
  const Tensor logits = class_logits(h, table, all_rows(table), scaled);
  return grad::softmax_xent(logits, Tensor::matrix(1, table.size(), target));
}

Tensor joint_loss(const JointCorpus& data, TokenRef token, const Encoder& encoder,
                  const PrototypeTable& table, bool scaled) {
  return joint_loss(data.corpus.sentences.at(token.sentence), token.index,
                    joint_target(data, token, table), encoder, table, scaled);
}

TrainingLog train_joint(const JointCorpus& data, const std::vector<std::size_t>& sentences,
                        Encoder& encoder, PrototypeTable& table, const TrainingSchedule& schedule) {
  if (sentences.empty()) throw std::invalid_argument("train_joint: empty corpus");
  const bool finetune = schedule.stage == Stage::FinetuneFewShot;
  const std::set<std::string> few(schedule.few_shot.begin(), schedule.few_shot.end());
  if (finetune) {
    if (schedule.k == 0) throw std::invalid_argument("fine-tuning needs K >= 1");
    for (const auto& c : few)
      if (!table.contains(c)) throw std::invalid_argument("no prototype for few-shot class '" + c + "'");
  }

  std::map<std::string, std::size_t> used;
  std::vector<TrainingUnit> units;
  for (std::size_t s : sentences) {
    const auto& sent = data.corpus.sentences.at(s);
    std::vector<bool> keep(sent.size(), true);
    if (finetune) {
      for (const auto& span : extract_spans(sent.tags)) {
        if (!few.count(span.cls)) continue;
        if (used[span.cls] < schedule.k) {
          ++used[span.cls];
        } else {
          std::fill(keep.begin() + static_cast<std::ptrdiff_t>(span.begin),
                    keep.begin() + static_cast<std::ptrdiff_t>(span.end), false);
        }
      }
    }
    const auto ids = encoder.token_ids(sent);
    TrainingUnit unit;
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (!keep[i]) continue;
      const auto w = encoder.window_ids(ids, i);
      unit.windows.insert(unit.windows.end(), w.begin(), w.end());
      const auto t = joint_target(data, {s, i}, table);
      unit.targets.insert(unit.targets.end(), t.begin(), t.end());
      ++unit.count;
    }
    if (unit.count > 0) units.push_back(std::move(unit));
  }
  if (units.empty()) throw std::invalid_argument("train_joint: no trainable tokens");

  FitOptions options;
  options.epochs = schedule.epochs;
  options.learning_rate = schedule.learning_rate;
  options.batch_units = schedule.batch_sentences;
  options.seed = schedule.seed;
  options.scaled = true;
  options.train_encoder = schedule.train_encoder;
  options.train_scale = schedule.train_scale;
  if (finetune && !schedule.train_base_prototypes) {
    for (std::size_t r = 0; r < table.size(); ++r)
      if (!few.count(table.classes()[r])) options.frozen_rows.push_back(r);
  }
  return fit_prototypes(units, encoder, table, all_rows(table), options);
}

std::vector<std::string> predict_sentence(const Sentence& sentence, const Encoder& encoder,
                                          const PrototypeTable& table) {
  if (sentence.size() == 0) return {};
  grad::NoGradGuard guard;
  const Tensor logits = class_logits(encoder.encode_sentence(sentence), table, all_rows(table), false);
  const auto v = logits.values();
  const std::size_t k = table.size();
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const auto row = v.begin() + static_cast<std::ptrdiff_t>(i * k);
    const auto best = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(k)) - row);
    const std::string& cls = table.classes()[best];
    classes.push_back(cls == kCatchAllClass ? "" : cls);
  }
  return classes_to_bio(classes);
}

void save_model(const ModelBundle& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  model.encoder.save(dir / "encoder.txt");
  model.table.save(dir / "prototypes.txt");
  std::ofstream out(dir / "config.txt");
  if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
  out << model.config;
}

ModelBundle load_model(const std::filesystem::path& dir) {
  ModelBundle model;
  model.encoder = Encoder::load(dir / "encoder.txt");
  model.table = PrototypeTable::load(dir / "prototypes.txt");
  if (model.table.dim() != model.encoder.hidden_dim()) {
    throw grad::DimensionError("prototype dim " + std::to_string(model.table.dim()) +
                               " does not match encoder hidden dim " +
                               std::to_string(model.encoder.hidden_dim()));
  }
  if (std::filesystem::exists(dir / "config.txt")) model.config = read_text_file(dir / "config.txt");
  return model;
}

}  // namespace muco
