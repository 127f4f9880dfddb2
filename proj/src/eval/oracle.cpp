#include "muco/eval/oracle.hpp"

#include <numeric>

namespace muco {

OracleConfig OracleConfig::recovery() {
  OracleConfig c;
  c.encoder.hidden_dim = 128;
  c.encoder.window = 0;
  c.step1.epochs = 5;
  c.step1.batch_size = 16;
  return c;
}

std::vector<LabeledExample> entity_examples(const Corpus& corpus,
                                            const std::vector<std::size_t>& sentences) {
  std::vector<LabeledExample> out;
  for (std::size_t s : sentences) {
    const Sentence& sent = corpus.sentences.at(s);
    for (std::size_t i = 0; i < sent.size(); ++i) {
      std::string c = tag_class(sent.tags[i]);
      if (!c.empty()) out.push_back({&sent, i, std::move(c)});
    }
  }
  return out;
}

std::vector<LabeledExample> entity_examples(const Corpus& corpus) {
  std::vector<std::size_t> all(corpus.sentences.size());
  std::iota(all.begin(), all.end(), 0);
  return entity_examples(corpus, all);
}

OracleRun prepare_oracle(const SyntheticSpec& spec, const OracleConfig& config, std::uint64_t seed) {
  SyntheticSpec s = spec;
  s.seed = seed;
  OracleRun run;
  run.data = generate_synthetic(s);
  const Corpus& corpus = run.data.corpus;

  Rng rng(seed);
  run.live = Encoder::create(run.data.embeddings, config.encoder, rng);
  run.frozen = run.live.snapshot();
  run.prototypes = PrototypeTable::init(corpus.classes(), config.encoder.hidden_dim, rng);

  const std::vector<LabeledExample> examples = entity_examples(corpus);
  Step1Config s1 = config.step1;
  s1.seed = seed;
  if (s1.epochs > 0) train_step1(examples, run.live, run.prototypes, s1);
  Step2Config s2 = config.step2;
  s2.seed = seed;
  run.classifier = train_step2(examples, run.frozen, run.live, s2);

  std::vector<std::size_t> all(corpus.sentences.size());
  std::iota(all.begin(), all.end(), 0);
  run.candidates = sample_o_candidates(corpus, all, config.max_candidates, seed);
  for (const TokenRef& t : run.candidates) {
    run.latent[{t.sentence, t.index}] = run.data.latent[t.sentence][t.index];
  }
  return run;
}

}  // namespace muco
