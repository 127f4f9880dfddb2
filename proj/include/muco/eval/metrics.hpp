#pragma once

#include <map>
#include <string>
#include <vector>

#include "muco/corpus/corpus.hpp"
#include "muco/miner/miner.hpp"

namespace muco {

struct ClassScore {
  std::string cls;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;       // support: gold span count
  std::size_t predicted = 0;
  std::size_t correct = 0;
};

struct ScoreReport {
  std::vector<ClassScore> classes;  // in the order requested
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Exact-match span scoring over the listed classes. Mined-class predictions
/// count as O. Empty denominators give 0.
ScoreReport score(const std::vector<std::vector<std::string>>& gold,
                  const std::vector<std::vector<std::string>>& predicted,
                  const std::vector<std::string>& classes);

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct MiningReport {
  std::size_t classes = 0;
  double ari = 0.0;                // over assigned tokens
  std::vector<double> ic;          // per mined class
  double irrelevant_fraction = 0.0;
  double id = 1.0;                 // hard partitions never overlap
};

/// latent maps each candidate to its ground-truth label; every candidate
/// must be present.
MiningReport mining_quality(const GroupAssignment& assignment,
                            const std::map<std::pair<std::size_t, std::size_t>, std::string>& latent);

}  // namespace muco
