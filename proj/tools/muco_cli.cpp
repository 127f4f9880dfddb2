// Command-line driver. The stepwise subcommands pass state through model
// directories:
//   pretrain -> frozen.txt encoder.txt prototypes.txt config.txt split.txt
//   joint    -> encoder.txt prototypes.txt config.txt split.txt episode.txt
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "muco/eval/experiment.hpp"
#include "muco/eval/gradient_suite.hpp"
#include "muco/eval/oracle.hpp"
#include "muco/util/config.hpp"

namespace fs = std::filesystem;
using namespace muco;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string join(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? "," : "") + std::to_string(ids[i]);
  return out;
}

std::vector<std::size_t> parse_ids(const std::string& text) {
  std::vector<std::size_t> ids;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) ids.push_back(parse_size("sentence id", item));
  return ids;
}

// Sentences without any entity of a few-shot class.
std::vector<std::size_t> base_sentences(const Corpus& corpus, const ClassSplit& split) {
  const std::set<std::string> few(split.few_shot.begin(), split.few_shot.end());
  std::vector<std::size_t> ids;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& tags = corpus.sentences[s].tags;
    if (std::none_of(tags.begin(), tags.end(), [&](const auto& t) { return few.count(tag_class(t)) > 0; }))
      ids.push_back(s);
  }
  return ids;
}

// The experiment config stored in a model directory; `corpus` points at the
// training corpus.
ExperimentConfig model_config(const fs::path& dir) {
  return parse_experiment_config(read_text_file(dir / "config.txt"));
}

int cmd_synth(const fs::path& spec_path, const fs::path& out) {
  const SyntheticData data = generate_synthetic(load_synthetic_spec(spec_path));
  fs::create_directories(out);
  write_bio(data.corpus, out / "corpus.bio");
  write_embeddings(data.embeddings, out / "embeddings.txt");
  write_latent_sidecar(data, out / "latent.tsv");
  std::printf("%zu sentences, %zu classes -> %s\n", data.corpus.sentences.size(),
              data.corpus.classes().size(), out.string().c_str());
  return 0;
}

int cmd_split(const fs::path& corpus_path, const fs::path& embeddings, double fraction, const fs::path& out) {
  const Corpus corpus = load_bio(corpus_path);
  Rng rng(0);
  const ClassSplit split = split_classes(corpus, load_embeddings(embeddings, rng), fraction);
  write_split(split, out);
  std::printf("base %zu, few-shot %zu\n", split.base.size(), split.few_shot.size());
  return 0;
}

int cmd_pretrain(const fs::path& corpus_path, const fs::path& split_path, const fs::path& config_path,
                 const fs::path& out) {
  // The corpus comes from the command line; every other setting from the file.
  std::string text;
  for (const auto& e : parse_config(read_text_file(config_path))) {
    if (e.key == "corpus" || e.key == "synthetic" || e.key.starts_with("synth.")) continue;
    text += e.key + " = " + e.value + "\n";
  }
  text += "corpus = " + fs::absolute(corpus_path).string() + "\n";
  ExperimentConfig cfg = parse_experiment_config(text, fs::absolute(config_path).parent_path());
  if (cfg.embeddings.empty()) throw ConfigError("pretrain config must name embeddings");

  const Corpus corpus = load_bio(cfg.corpus);
  Rng table_rng(0);
  const EmbeddingTable embeddings = load_embeddings(cfg.embeddings, table_rng);
  const ClassSplit split = read_split(split_path);
  const std::uint64_t seed = cfg.seeds.front();

  Rng rng(seed);
  Encoder live = Encoder::create(embeddings, cfg.encoder, rng);
  const Encoder frozen = live.snapshot();
  PrototypeTable table = PrototypeTable::init(split.base, cfg.encoder.hidden_dim, rng, cfg.initial_scale);
  const auto examples = entity_examples(corpus, base_sentences(corpus, split));
  if (examples.empty()) throw std::invalid_argument("no base-class entities to pretrain on");
  Step1Config s1 = cfg.step1;
  s1.seed = seed;
  const TrainingLog log = train_step1(examples, live, table, s1);

  fs::create_directories(out);
  frozen.save(out / "frozen.txt");
  live.save(out / "encoder.txt");
  table.save(out / "prototypes.txt");
  write_split(split, out / "split.txt");
  std::string stored = "embeddings = " + fs::absolute(cfg.embeddings).string() + "\n";
  for (const auto& e : parse_config(text))
    if (e.key != "embeddings" && e.key != "latent") stored += e.key + " = " + e.value + "\n";
  write_text(out / "config.txt", stored);
  std::printf("step 1: %zu examples, final loss %.6f\n", examples.size(),
              log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back());
  return 0;
}

int cmd_mine(const fs::path& model, const fs::path& corpus_path, double gamma, std::size_t target_r,
             std::size_t min_size, std::size_t max_candidates, const fs::path& out) {
  const ExperimentConfig cfg = model_config(model);
  const Corpus corpus = load_bio(corpus_path);
  const ClassSplit split = read_split(model / "split.txt");
  const Encoder frozen = Encoder::load(model / "frozen.txt");
  const Encoder live = Encoder::load(model / "encoder.txt");
  const std::uint64_t seed = cfg.seeds.front();

  const auto sentences = base_sentences(corpus, split);
  Step2Config s2 = cfg.step2;
  s2.seed = seed;
  const GroupClassifier classifier = train_step2(entity_examples(corpus, sentences), frozen, live, s2);
  const PairScoreMatrix scores(classifier, corpus, sample_o_candidates(corpus, sentences, max_candidates, seed),
                               frozen, live);
  if (target_r > 0) gamma = calibrate_gamma(scores, target_r, min_size);
  GroupAssignment assignment = mine(scores, gamma, min_size);
  if (assignment.class_count() > 0) soft_label(assignment, corpus, live);
  export_assignment(assignment, corpus, out.string() + ".bio", out);
  std::printf("gamma %.6f: %zu classes over %zu candidates\n", gamma, assignment.class_count(), scores.size());
  return 0;
}

int cmd_joint(const fs::path& model, const fs::path& assignment_path, std::size_t k, std::uint64_t seed,
              const fs::path& out) {
  const ExperimentConfig cfg = model_config(model);
  const Corpus corpus = load_bio(cfg.corpus);
  const ClassSplit split = read_split(model / "split.txt");
  const GroupAssignment assignment = import_assignment(assignment_path);
  const JointCorpus joint = relabel(corpus, assignment);

  Encoder encoder = Encoder::load(model / "encoder.txt");
  PrototypeTable table = PrototypeTable::load(model / "prototypes.txt");
  Rng rng(seed + 1);
  table.append(assignment.class_names, rng);
  table.append({kCatchAllClass}, rng);
  table.set_scale(cfg.initial_scale);
  TrainingSchedule pre = cfg.pretrain;
  pre.stage = Stage::PretrainBase;
  pre.seed = seed;
  if (pre.epochs > 0) train_joint(joint, base_sentences(corpus, split), encoder, table, pre);

  const Episode episode = sample_episode(corpus, split, k, seed);
  Rng few_rng(seed + 2);
  table.append(split.few_shot, few_rng);
  if (!cfg.reuse_scale) table.set_scale(cfg.initial_scale);
  TrainingSchedule ft = cfg.finetune;
  ft.stage = Stage::FinetuneFewShot;
  ft.seed = seed;
  ft.few_shot = split.few_shot;
  ft.k = k;
  train_joint(joint, episode.support, encoder, table, ft);

  std::printf("support %zu sentences, query %zu, %zu prototypes, s = %.4f\n", episode.support.size(),
              episode.query.size(), table.size(), table.scale_value());
  fs::create_directories(out);
  save_model(ModelBundle{std::move(encoder), std::move(table), read_text_file(model / "config.txt")}, out);
  write_split(split, out / "split.txt");
  write_text(out / "episode.txt", "k = " + std::to_string(k) + "\nsupport = " + join(episode.support) +
                                      "\nquery = " + join(episode.query) + "\n");
  return 0;
}

int cmd_eval(const fs::path& model_dir, const fs::path& corpus_path, const fs::path& split_path, const fs::path& out) {
  const ModelBundle model = load_model(model_dir);
  const Corpus corpus = load_bio(corpus_path);
  const ClassSplit split = read_split(split_path);
  std::vector<std::size_t> query;
  if (fs::exists(model_dir / "episode.txt")) {
    for (const auto& e : parse_config(read_text_file(model_dir / "episode.txt")))
      if (e.key == "query") query = parse_ids(e.value);
  } else {
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) query.push_back(s);
  }
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> predicted;
  for (std::size_t s : query) {
    const Sentence& sent = corpus.sentences.at(s);
    gold.push_back(sent.tags);
    predicted.push_back(predict_sentence(sent, model.encoder, model.table));
  }
  const ScoreReport report = score(gold, predicted, split.few_shot);
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out.string());
  csv << "class,precision,recall,f1,gold,predicted,correct\n";
  char buf[160];
  for (const auto& c : report.classes) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%zu,%zu,%zu\n", c.cls.c_str(), c.precision, c.recall,
                  c.f1, c.gold, c.predicted, c.correct);
    csv << buf;
  }
  std::snprintf(buf, sizeof buf, "macro,%.17g,%.17g,%.17g,,,\n", report.macro_precision, report.macro_recall,
                report.macro_f1);
  csv << buf;
  std::printf("%zu query sentences, macro-F1 %.4f\n", query.size(), report.macro_f1);
  return 0;
}

int cmd_experiment(const fs::path& config_path, const std::string& seeds, const std::vector<std::string>& methods,
                   const fs::path& out) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
  if (!methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
  }
  cfg.validate();
  const ExperimentResult result = run_experiment(cfg, &std::cerr);
  fs::create_directories(out);
  write_scores_csv(result, out / "scores.csv");
  write_mining_csv(result, out / "mining.csv");
  for (std::size_t k : cfg.ks) {
    for (Method m : cfg.methods) {
      const MeanStd s = macro_f1_summary(result, m, k);
      std::printf("K=%zu %-8s macro-F1 %.4f +- %.4f\n", k, method_name(m).c_str(), s.mean, s.std);
    }
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t points) {
  bool ok = true;
  for (const auto& c : run_gradient_suite(seed, points)) {
    std::printf("%-4s %-32s points %-3zu max rel err %.3e\n", c.passed() ? "ok" : "FAIL", c.name.c_str(),
                c.points, c.max_relative_error);
    ok = ok && c.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot token classification with mined undefined classes"};
  app.require_subcommand(1);

  fs::path spec, out, corpus, embeddings, split, config, model, assignment;
  double fraction = 1.0 / 3.0;
  double gamma = kDefaultGamma;
  std::size_t target_r = 0, min_size = kDefaultMinSize, max_candidates = kDefaultMaxCandidates;
  std::size_t k = 1, points = 20;
  std::uint64_t seed = 1;
  std::string seeds;
  std::vector<std::string> methods;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus, embeddings and latent sidecar");
  synth->add_option("--spec", spec, "synthetic spec file")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out, "output directory")->required();

  auto* split_cmd = app.add_subcommand("split", "choose few-shot classes by embedding dissimilarity");
  split_cmd->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--embeddings", embeddings)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--fraction", fraction, "few-shot share of the remaining base classes");
  split_cmd->add_option("--out", out)->required();

  auto* pretrain = app.add_subcommand("pretrain", "prototype learning on base classes");
  pretrain->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  pretrain->add_option("--split", split)->required()->check(CLI::ExistingFile);
  pretrain->add_option("--config", config, "experiment config naming embeddings")->required()->check(CLI::ExistingFile);
  pretrain->add_option("--out", out, "model directory")->required();

  auto* mine_cmd = app.add_subcommand("mine", "group O tokens into undefined classes");
  mine_cmd->add_option("--model", model, "pretrain output")->required()->check(CLI::ExistingDirectory);
  mine_cmd->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  auto* gamma_opt = mine_cmd->add_option("--gamma", gamma, "grouping threshold");
  mine_cmd->add_option("--target-r", target_r, "calibrate gamma to this class count")->excludes(gamma_opt);
  mine_cmd->add_option("--min-size", min_size);
  mine_cmd->add_option("--max-candidates", max_candidates);
  mine_cmd->add_option("--out", out, "assignment file; the relabeled corpus goes to <out>.bio")->required();

  auto* joint_cmd = app.add_subcommand("joint", "joint training with mined classes, then few-shot fine-tuning");
  joint_cmd->add_option("--model", model, "pretrain output")->required()->check(CLI::ExistingDirectory);
  joint_cmd->add_option("--assignment", assignment)->required()->check(CLI::ExistingFile);
  joint_cmd->add_option("--K", k)->required();
  joint_cmd->add_option("--seed", seed);
  joint_cmd->add_option("--out", out)->required();

  auto* eval_cmd = app.add_subcommand("eval", "score a model on its query sentences");
  eval_cmd->add_option("--model", model, "joint output")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", out, "CSV report")->required();

  auto* experiment = app.add_subcommand("experiment", "multi-seed comparison of methods");
  experiment->add_option("--config", config)->required()->check(CLI::ExistingFile);
  experiment->add_option("--seeds", seeds, "e.g. 1..10 or 1,2,3");
  experiment->add_option("--method", methods, "muco, single_o, ws; repeatable")->delimiter(',');
  experiment->add_option("--out", out)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seed", seed);
  gradcheck->add_option("--points", points);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(spec, out);
    if (*split_cmd) return cmd_split(corpus, embeddings, fraction, out);
    if (*pretrain) return cmd_pretrain(corpus, split, config, out);
    if (*mine_cmd) return cmd_mine(model, corpus, gamma, target_r, min_size, max_candidates, out);
    if (*joint_cmd) {
      if (k != 1 && k != 5) throw ConfigError("--K must be 1 or 5");
      return cmd_joint(model, assignment, k, seed, out);
    }
    if (*eval_cmd) return cmd_eval(model, corpus, split, out);
    if (*experiment) return cmd_experiment(config, seeds, methods, out);
    if (*gradcheck) return cmd_gradcheck(seed, points);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
