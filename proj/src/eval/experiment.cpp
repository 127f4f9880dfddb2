#include "muco/eval/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "muco/util/config.hpp"

namespace muco {

std::string method_name(Method method) {
  switch (method) {
    case Method::Muco: return "muco";
    case Method::SingleO: return "single_o";
    case Method::Ws: return "ws";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "muco") return Method::Muco;
  if (name == "single_o" || name == "single_o_baseline") return Method::SingleO;
  if (name == "ws" || name == "ws_baseline") return Method::Ws;
  throw ConfigError("method: expected muco, single_o or ws, got '" + name + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) items.push_back(item.substr(a, b - a + 1));
  }
  return items;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!synthetic && (corpus.empty() || embeddings.empty())) {
    throw ConfigError("config needs either a synthetic spec or both corpus and embeddings");
  }
  if (synthetic && !corpus.empty()) throw ConfigError("corpus and synthetic are mutually exclusive");
  if (!(split_fraction >= 0.0)) throw ConfigError("split_fraction must be nonnegative");
  if (ks.empty()) throw ConfigError("k: no values given");
  for (auto k : ks) {
    if (k == 0) throw ConfigError("k: must be at least 1");
    if (restrict_k && k != 1 && k != 5) {
      throw ConfigError("k: " + std::to_string(k) + " is outside {1, 5}; set restrict_k = false");
    }
  }
  if (methods.empty()) throw ConfigError("methods: no methods given");
  if (seeds.empty()) throw ConfigError("seeds: no seeds given");
  if (encoder.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (min_size == 0) throw ConfigError("min_size must be at least 1");
  if (max_candidates < 2) throw ConfigError("max_candidates must be at least 2");
  if (step2.batch_size < 2) throw ConfigError("step2_batch must be at least 2");
  if (!(initial_scale >= kMinScale)) throw ConfigError("initial_scale must be at least 0.01");
  for (double lr : {step1.learning_rate, step2.learning_rate, pretrain.learning_rate,
                    finetune.learning_rate}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
}

std::string ExperimentConfig::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(source)));
  return buf;
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.source = text;
  std::string synthetic_text;
  bool synthetic = false;
  std::vector<ConfigEntry> own;
  for (auto& e : parse_config(text)) {
    if (e.key.starts_with("synth.")) {
      synthetic = true;
      synthetic_text += e.key.substr(6) + " = " + e.value + "\n";
    } else if (e.key == "synthetic") {
      synthetic = true;
      synthetic_text = read_text_file(resolve(base_dir, e.value)) + "\n" + synthetic_text;
    } else {
      own.push_back(std::move(e));
    }
  }
  ConfigBinder b;
  b.bind("corpus", [&](const std::string& v) { cfg.corpus = resolve(base_dir, v); });
  b.bind("embeddings", [&](const std::string& v) { cfg.embeddings = resolve(base_dir, v); });
  b.bind("latent", [&](const std::string& v) { cfg.latent = resolve(base_dir, v); });
  b.bind("split_fraction", cfg.split_fraction);
  b.bind("k", [&](const std::string& v) {
    cfg.ks.clear();
    for (const auto& item : split_list(v)) cfg.ks.push_back(parse_size("k", item));
  });
  b.bind("methods", [&](const std::string& v) {
    cfg.methods.clear();
    for (const auto& item : split_list(v)) cfg.methods.push_back(parse_method(item));
  });
  b.bind("seeds", [&](const std::string& v) { cfg.seeds = parse_seed_list(v); });
  b.bind("restrict_k", cfg.restrict_k);
  b.bind("hidden_dim", cfg.encoder.hidden_dim);
  b.bind("window", cfg.encoder.window);
  b.bind("train_embeddings", cfg.encoder.train_embeddings);
  b.bind("step1_epochs", cfg.step1.epochs);
  b.bind("step1_lr", cfg.step1.learning_rate);
  b.bind("step1_batch", cfg.step1.batch_size);
  b.bind("step2_epochs", cfg.step2.epochs);
  b.bind("step2_lr", cfg.step2.learning_rate);
  b.bind("step2_batch", cfg.step2.batch_size);
  b.bind("step2_pairs", cfg.step2.pairs_per_example);
  b.bind("gamma", cfg.gamma);
  b.bind("target_r", cfg.target_r);
  b.bind("min_size", cfg.min_size);
  b.bind("max_candidates", cfg.max_candidates);
  b.bind("ws_clusters", cfg.ws_clusters);
  b.bind("pretrain_epochs", cfg.pretrain.epochs);
  b.bind("pretrain_lr", cfg.pretrain.learning_rate);
  b.bind("pretrain_batch", cfg.pretrain.batch_sentences);
  b.bind("finetune_epochs", cfg.finetune.epochs);
  b.bind("finetune_lr", cfg.finetune.learning_rate);
  b.bind("finetune_batch", cfg.finetune.batch_sentences);
  b.bind("train_base_prototypes", cfg.finetune.train_base_prototypes);
  b.bind("initial_scale", cfg.initial_scale);
  b.bind("reuse_scale", cfg.reuse_scale);
  b.apply(own);
  if (synthetic) {
    try {
      cfg.synthetic = parse_synthetic_spec(synthetic_text);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text_file(path), path.parent_path());
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  ExperimentData data;
  if (config.synthetic) {
    SyntheticData synth = generate_synthetic(*config.synthetic);
    data.corpus = std::move(synth.corpus);
    data.embeddings = std::move(synth.embeddings);
    for (std::size_t s = 0; s < synth.latent.size(); ++s)
      for (std::size_t i = 0; i < synth.latent[s].size(); ++i)
        if (!synth.latent[s][i].empty()) data.latent[{s, i}] = synth.latent[s][i];
    return data;
  }
  data.corpus = load_bio(config.corpus);
  Rng rng(0);
  data.embeddings = load_embeddings(config.embeddings, rng);
  if (!config.latent.empty()) data.latent = read_latent_sidecar(config.latent);
  return data;
}

namespace {

struct SeedState {
  Encoder frozen;
  Encoder live;
  PrototypeTable base_table;
};

struct Trained {
  Encoder encoder;
  PrototypeTable table;
};

class SeedRunner {
 public:
  SeedRunner(const ExperimentConfig& cfg, const ExperimentData& data, const ClassSplit& split,
             std::uint64_t seed)
      : cfg_(cfg), data_(data), split_(split), seed_(seed) {
    const std::set<std::string> few(split.few_shot.begin(), split.few_shot.end());
    for (std::size_t s = 0; s < data.corpus.sentences.size(); ++s) {
      const auto& tags = data.corpus.sentences[s].tags;
      const bool has_few = std::any_of(tags.begin(), tags.end(),
                                       [&](const std::string& t) { return few.count(tag_class(t)) > 0; });
      if (!has_few) pretrain_.push_back(s);
    }
    if (pretrain_.empty()) throw std::invalid_argument("every sentence holds a few-shot entity");

    Rng rng(seed);
    state_.live = Encoder::create(data.embeddings, cfg.encoder, rng);
    state_.frozen = state_.live.snapshot();
    state_.base_table = PrototypeTable::init(split.base, cfg.encoder.hidden_dim, rng, cfg.initial_scale);
    std::vector<LabeledExample> examples;
    for (std::size_t s : pretrain_) {
      const auto& sent = data.corpus.sentences[s];
      for (std::size_t i = 0; i < sent.size(); ++i) {
        const std::string c = tag_class(sent.tags[i]);
        if (!c.empty()) examples.push_back({&sent, i, c});
      }
    }
    if (!examples.empty() && cfg.step1.epochs > 0) {
      Step1Config s1 = cfg.step1;
      s1.seed = seed;
      train_step1(examples, state_.live, state_.base_table, s1);
    }
  }

  RunRecord run(Method method, std::size_t k) {
    const Episode episode = sample_episode(data_.corpus, split_, k, seed_);
    RunRecord rec;
    rec.method = method;
    rec.k = k;
    rec.seed = seed_;

    GroupAssignment assignment;
    if (method == Method::Muco) {
      assignment = group_miner(episode);
    } else if (method == Method::Ws) {
      std::size_t clusters = cfg_.ws_clusters;
      if (clusters == 0) clusters = group_miner(episode).class_count();
      const auto candidates = candidates_for(episode);
      if (clusters > 0 && candidates.size() >= clusters) {
        assignment = ws_baseline(data_.corpus, candidates, data_.embeddings, clusters, seed_, state_.live);
      }
    }
    rec.mined_classes = assignment.class_count();
    if (method != Method::SingleO && !data_.latent.empty() && !assignment.tokens.empty()) {
      rec.mining = mining_quality(assignment, data_.latent);
    }

    const JointCorpus joint = relabel(data_.corpus, assignment);
    Trained model = method == Method::SingleO ? single_o_pretrained(joint) : pretrain(joint, assignment);

    Rng few_rng(seed_ + 2);
    model.table.append(split_.few_shot, few_rng);
    if (!cfg_.reuse_scale) model.table.set_scale(cfg_.initial_scale);
    TrainingSchedule ft = cfg_.finetune;
    ft.stage = Stage::FinetuneFewShot;
    ft.seed = seed_;
    ft.few_shot = split_.few_shot;
    ft.k = k;
    train_joint(joint, episode.support, model.encoder, model.table, ft);

    std::vector<std::vector<std::string>> gold;
    std::vector<std::vector<std::string>> predicted;
    for (std::size_t s : episode.query) {
      gold.push_back(data_.corpus.sentences[s].tags);
      predicted.push_back(predict_sentence(data_.corpus.sentences[s], model.encoder, model.table));
    }
    rec.score = score(gold, predicted, split_.few_shot);
    return rec;
  }

 private:
  std::vector<std::size_t> training_sentences(const Episode& episode) const {
    std::vector<std::size_t> ids = pretrain_;
    ids.insert(ids.end(), episode.support.begin(), episode.support.end());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::vector<TokenRef> candidates_for(const Episode& episode) const {
    return sample_o_candidates(data_.corpus, training_sentences(episode), cfg_.max_candidates, seed_);
  }

  GroupAssignment group_miner(const Episode& episode) {
    if (auto it = mined_.find(episode.k); it != mined_.end()) return it->second;
    std::vector<LabeledExample> examples;
    for (std::size_t s : training_sentences(episode)) {
      const auto& sent = data_.corpus.sentences[s];
      for (std::size_t i = 0; i < sent.size(); ++i) {
        const std::string c = tag_class(sent.tags[i]);
        if (!c.empty()) examples.push_back({&sent, i, c});
      }
    }
    Step2Config s2 = cfg_.step2;
    s2.seed = seed_;
    const GroupClassifier classifier = train_step2(examples, state_.frozen, state_.live, s2);
    const PairScoreMatrix scores(classifier, data_.corpus, candidates_for(episode), state_.frozen,
                                 state_.live);
    const double gamma = cfg_.target_r > 0 ? calibrate_gamma(scores, cfg_.target_r, cfg_.min_size)
                                           : cfg_.gamma;
    GroupAssignment a = mine(scores, gamma, cfg_.min_size);
    if (a.class_count() > 0) soft_label(a, data_.corpus, state_.live);
    mined_[episode.k] = a;
    return a;
  }

  Trained pretrain(const JointCorpus& joint, const GroupAssignment& assignment) const {
    Trained model{state_.live.clone(), state_.base_table.clone()};
    Rng rng(seed_ + 1);
    model.table.append(assignment.class_names, rng);
    model.table.append({kCatchAllClass}, rng);
    model.table.set_scale(cfg_.initial_scale);
    TrainingSchedule schedule = cfg_.pretrain;
    schedule.stage = Stage::PretrainBase;
    schedule.seed = seed_;
    if (schedule.epochs > 0) train_joint(joint, pretrain_, model.encoder, model.table, schedule);
    return model;
  }

  Trained single_o_pretrained(const JointCorpus& joint) {
    if (!single_o_) single_o_ = pretrain(joint, GroupAssignment{});
    return Trained{single_o_->encoder.clone(), single_o_->table.clone()};
  }

  const ExperimentConfig& cfg_;
  const ExperimentData& data_;
  const ClassSplit& split_;
  std::uint64_t seed_;
  std::vector<std::size_t> pretrain_;
  SeedState state_;
  std::map<std::size_t, GroupAssignment> mined_;
  std::optional<Trained> single_o_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* progress) {
  const ExperimentData data = load_experiment_data(config);
  return run_experiment(config, data, progress);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::ostream* progress) {
  config.validate();
  ExperimentResult result;
  result.fingerprint = config.fingerprint();
  result.split = split_classes(data.corpus, data.embeddings, config.split_fraction);
  if (result.split.few_shot.empty()) throw std::invalid_argument("split produced no few-shot classes");
  if (result.split.base.empty()) throw std::invalid_argument("split produced no base classes");

  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  for (std::uint64_t seed : seeds) {
    SeedRunner runner(config, data, result.split, seed);
    for (std::size_t k : config.ks) {
      for (Method m : config.methods) {
        RunRecord rec = runner.run(m, k);
        if (progress) {
          *progress << "seed " << seed << " K=" << k << ' ' << method_name(m)
                    << " macro-F1 " << std::fixed << std::setprecision(4) << rec.score.macro_f1
                    << " mined " << rec.mined_classes;
          if (rec.mining) *progress << " ARI " << rec.mining->ari;
          *progress << std::defaultfloat << '\n';
        }
        result.runs.push_back(std::move(rec));
      }
    }
  }
  std::stable_sort(result.runs.begin(), result.runs.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.method, a.k, a.seed) < std::tie(b.method, b.k, b.seed);
  });
  return result;
}

MeanStd macro_f1_summary(const ExperimentResult& result, Method method, std::size_t k) {
  std::vector<double> values;
  for (const auto& r : result.runs)
    if (r.method == method && r.k == k) values.push_back(r.score.macro_f1);
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  for (double v : values) out.std += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(values.size()));
  return out;
}

void write_scores_csv(const ExperimentResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,k,seed,class,precision,recall,f1,gold,predicted,correct,mined_classes,fingerprint\n";
  std::vector<std::pair<Method, std::size_t>> groups;
  for (const auto& r : result.runs) {
    if (groups.empty() || groups.back() != std::make_pair(r.method, r.k)) groups.emplace_back(r.method, r.k);
    const std::string prefix = method_name(r.method) + "," + std::to_string(r.k) + "," + std::to_string(r.seed) + ",";
    for (const auto& c : r.score.classes) {
      out << prefix << c.cls << ',' << format_double(c.precision) << ',' << format_double(c.recall)
          << ',' << format_double(c.f1) << ',' << c.gold << ',' << c.predicted << ',' << c.correct
          << ',' << r.mined_classes << ',' << result.fingerprint << '\n';
    }
    out << prefix << "macro," << format_double(r.score.macro_precision) << ','
        << format_double(r.score.macro_recall) << ',' << format_double(r.score.macro_f1) << ",,,,"
        << r.mined_classes << ',' << result.fingerprint << '\n';
  }
  for (const auto& [method, k] : groups) {
    std::vector<const RunRecord*> runs;
    for (const auto& r : result.runs)
      if (r.method == method && r.k == k) runs.push_back(&r);
    auto stats = [&](auto field) {
      double mean = 0.0;
      for (const auto* r : runs) mean += field(*r);
      mean /= static_cast<double>(runs.size());
      double var = 0.0;
      for (const auto* r : runs) var += (field(*r) - mean) * (field(*r) - mean);
      return std::make_pair(mean, std::sqrt(var / static_cast<double>(runs.size())));
    };
    const auto p = stats([](const RunRecord& r) { return r.score.macro_precision; });
    const auto rc = stats([](const RunRecord& r) { return r.score.macro_recall; });
    const auto f = stats([](const RunRecord& r) { return r.score.macro_f1; });
    const std::string prefix = method_name(method) + "," + std::to_string(k) + ",";
    out << prefix << "MEAN,macro," << format_double(p.first) << ',' << format_double(rc.first) << ','
        << format_double(f.first) << ",,,,," << result.fingerprint << '\n';
    out << prefix << "STD,macro," << format_double(p.second) << ',' << format_double(rc.second) << ','
        << format_double(f.second) << ",,,,," << result.fingerprint << '\n';
  }
}

void write_mining_csv(const ExperimentResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,k,seed,mined_classes,ari,mean_ic,irrelevant_fraction,id\n";
  for (const auto& r : result.runs) {
    if (r.method == Method::SingleO) continue;
    out << method_name(r.method) << ',' << r.k << ',' << r.seed << ',' << r.mined_classes;
    if (r.mining) {
      double ic = 0.0;
      for (double v : r.mining->ic) ic += v;
      if (!r.mining->ic.empty()) ic /= static_cast<double>(r.mining->ic.size());
      out << ',' << format_double(r.mining->ari) << ',' << format_double(ic) << ','
          << format_double(r.mining->irrelevant_fraction) << ',' << format_double(r.mining->id);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

}  // namespace muco
