#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "muco/corpus/synthetic.hpp"
#include "muco/miner/miner.hpp"

namespace muco {

struct OracleConfig {
  EncoderConfig encoder;
  Step1Config step1;
  Step2Config step2;
  std::size_t max_candidates = kDefaultMaxCandidates;

  /// Settings under which mining recovers 6-sigma latent clusters: a wide
  /// window-free encoder and a short step 1.
  static OracleConfig recovery();
};

/// Steps 1 and 2 on a generated corpus, every sentence used and every
/// predefined class trained, ready for mining.
struct OracleRun {
  SyntheticData data;
  Encoder frozen;
  Encoder live;
  PrototypeTable prototypes;
  GroupClassifier classifier;
  std::vector<TokenRef> candidates;
  std::map<std::pair<std::size_t, std::size_t>, std::string> latent;  // per candidate
};

OracleRun prepare_oracle(const SyntheticSpec& spec, const OracleConfig& config, std::uint64_t seed);

/// Entity tokens of the listed sentences as step-1/step-2 examples.
std::vector<LabeledExample> entity_examples(const Corpus& corpus,
                                            const std::vector<std::size_t>& sentences);
std::vector<LabeledExample> entity_examples(const Corpus& corpus);

}  // namespace muco
