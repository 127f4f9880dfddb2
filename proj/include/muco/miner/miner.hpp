#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "muco/corpus/corpus.hpp"
#include "muco/proto/prototypes.hpp"

namespace muco {

inline constexpr double kDefaultGamma = 0.68;
inline constexpr std::size_t kDefaultMinSize = 3;
inline constexpr std::size_t kDefaultMaxCandidates = 2000;
inline constexpr std::size_t kIrrelevant = static_cast<std::size_t>(-1);

/// A token occurrence: sentence id and position.
struct TokenRef {
  std::size_t sentence = 0;
  std::size_t index = 0;

  auto operator<=>(const TokenRef&) const = default;
};

/// [h_i; h_j; t_i; t_j; |h_i-h_j|; |t_i-t_j|; |h_i-t_i|; |h_j-t_j|] where h is
/// the frozen encoding and t the live one.
Tensor pair_feature(const Tensor& h_i, const Tensor& h_j, const Tensor& t_i, const Tensor& t_j);
Tensor pair_feature(const Sentence& s_i, std::size_t i, const Sentence& s_j, std::size_t j,
                    const Encoder& frozen, const Encoder& live);

struct GroupClassifier {
  Tensor weight;  // [8 d_h]
  Tensor bias;    // [1]
  double gamma = kDefaultGamma;

  static GroupClassifier zeros(std::size_t hidden_dim, double gamma = kDefaultGamma);
  std::size_t hidden_dim() const { return weight.size() / 8; }
  double logit(const Tensor& feature) const;
};

/// sigmoid of the mean of both orientations' logits.
double pair_score(const GroupClassifier& classifier, const Tensor& feature_ij,
                  const Tensor& feature_ji);

struct Step2Config {
  std::size_t epochs = 20;
  double learning_rate = 0.05;
  std::size_t batch_size = 256;  // pairs, half positive and half negative
  std::size_t pairs_per_example = 50;
  std::uint64_t seed = 0;
  bool invert_labels = false;  // trains on 1 - y; diagnostic only
};

/// Trains W and b with binary cross-entropy on balanced same/different-class
/// pairs of the examples. The encoders are only read.
GroupClassifier train_step2(const std::vector<LabeledExample>& examples, const Encoder& frozen,
                            const Encoder& live, const Step2Config& config);

/// Uniform sample without replacement of O-tagged tokens, at most max_size,
/// returned in (sentence, index) order. Only the listed sentences are used.
std::vector<TokenRef> sample_o_candidates(const Corpus& corpus,
                                          const std::vector<std::size_t>& sentences,
                                          std::size_t max_size, std::uint64_t seed);

/// Frozen and live encodings of a token list, [n, d_h] each.
struct CandidateEncodings {
  Tensor frozen;
  Tensor live;
};
CandidateEncodings encode_tokens(const Corpus& corpus, const std::vector<TokenRef>& tokens,
                                 const Encoder& frozen, const Encoder& live);

/// Symmetric same-group probabilities over candidates in canonical order.
class PairScoreMatrix {
 public:
  PairScoreMatrix(const GroupClassifier& classifier, const Corpus& corpus,
                  std::vector<TokenRef> candidates, const Encoder& frozen, const Encoder& live);

  const std::vector<TokenRef>& candidates() const { return candidates_; }
  std::size_t size() const { return candidates_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return scores_[i * size() + j]; }

 private:
  std::vector<TokenRef> candidates_;
  std::vector<double> scores_;
};

struct GroupAssignment {
  std::vector<std::string> class_names;  // o_1..o_r
  std::vector<TokenRef> tokens;          // canonical order
  std::vector<std::size_t> hard;         // class id or kIrrelevant, per token
  std::vector<std::vector<double>> soft; // per token; empty when irrelevant

  std::size_t class_count() const { return class_names.size(); }
  /// Maximal runs of consecutive same-class tokens, per sentence.
  std::vector<std::pair<std::size_t, Span>> spans() const;
  std::vector<std::size_t> class_sizes() const;
};

/// Connected components of the graph with an edge wherever b > gamma. Only
/// components of at least min_size tokens become classes, named by
/// decreasing size with ties going to the component holding the smallest
/// candidate.
GroupAssignment mine(const PairScoreMatrix& scores, double gamma, std::size_t min_size);
GroupAssignment mine(const GroupClassifier& classifier, const Corpus& corpus,
                     const std::vector<TokenRef>& candidates, const Encoder& frozen,
                     const Encoder& live, double gamma, std::size_t min_size);

/// Soft rows: softmax over cosine similarity of the live encoding to each
/// class center (the mean live encoding of the class's members).
void soft_label(GroupAssignment& assignment, const Corpus& corpus, const Encoder& live);

/// Bisection over gamma (30 steps) for the class count nearest target_r; when
/// it misses, an exact scan over all pair scores picks the nearest count.
double calibrate_gamma(const PairScoreMatrix& scores, std::size_t target_r, std::size_t min_size);

/// Word-similarity baseline: seeded k-means over static embeddings of the
/// candidates, then the same soft labeling.
GroupAssignment ws_baseline(const Corpus& corpus, const std::vector<TokenRef>& candidates,
                            const EmbeddingTable& embeddings, std::size_t k, std::uint64_t seed,
                            const Encoder& live);

/// Plain k-means: returns the cluster index of every point.
struct KMeansResult {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> centers;
  std::size_t iterations = 0;
};
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                    std::size_t max_iterations = 100, double tolerance = 1e-6);

/// Writes the corpus with B-o_k/I-o_k tags on mined spans, and a sidecar of
/// `sentence_id token_index class probs...` rows.
void export_assignment(const GroupAssignment& assignment, const Corpus& corpus,
                       const std::filesystem::path& bio_path,
                       const std::filesystem::path& soft_path);
GroupAssignment import_assignment(const std::filesystem::path& soft_path);

}  // namespace muco
