#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "muco/grad/tensor.hpp"

namespace muco {

using grad::Tensor;
using Rng = std::mt19937_64;

/// Tokens plus BIO tags of equal length.
struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

/// Dense token ids. Id 0 is padding and id 1 the unknown token; neither can
/// be produced by a real token.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();

  /// Returns the id of token, adding it if new.
  std::size_t add(const std::string& token);
  std::optional<std::size_t> find(const std::string& token) const;
  /// Unknown tokens map to kUnk when unknown_enabled(), otherwise throw.
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  bool unknown_enabled() const { return unknown_enabled_; }
  void set_unknown_enabled(bool enabled) { unknown_enabled_ = enabled; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  bool unknown_enabled_ = true;
};

struct EmbeddingTable {
  Vocabulary vocab;
  Tensor table;  // [|V|, d], row i belongs to vocab id i
};

/// Reads `token v1 ... vd` lines. The two special rows are drawn uniformly in
/// [-0.1, 0.1] from rng.
EmbeddingTable load_embeddings(const std::filesystem::path& path, Rng& rng);

struct EncoderConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t window = 2;
  bool train_embeddings = true;
};

/// Windowed token encoder: the 2w+1 embeddings around a position are
/// concatenated, mixed by an affine layer with tanh, then passed through an
/// affine output layer. Positions outside the sentence read the padding row.
class Encoder {
 public:
  Encoder() = default;

  /// Every parameter drawn uniformly in [-0.1, 0.1].
  static Encoder create(Vocabulary vocab, const EncoderConfig& config, Rng& rng);
  /// Embedding rows copied from a pretrained table; other parameters random.
  static Encoder create(const EmbeddingTable& embeddings, const EncoderConfig& config, Rng& rng);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t window() const { return window_; }
  std::size_t embed_dim() const { return embedding_.cols(); }
  std::size_t hidden_dim() const { return out_bias_.size(); }
  const std::string& nonlinearity() const { return nonlinearity_; }
  bool train_embeddings() const { return train_embeddings_; }
  void set_train_embeddings(bool value);

  std::vector<std::size_t> token_ids(const Sentence& sentence) const;
  /// Ids of the (2w+1)-token window centred on index, padded at the edges.
  std::vector<std::size_t> window_ids(const std::vector<std::size_t>& ids, std::size_t index) const;
  /// Window ids for every position of a sentence, concatenated.
  std::vector<std::size_t> sentence_windows(const std::vector<std::size_t>& ids) const;

  /// Hidden vector [d_h] of the token at index.
  Tensor encode(const Sentence& sentence, std::size_t index) const;
  /// Hidden vectors [n, d_h] for n windows given as n*(2w+1) ids.
  Tensor encode_windows(const std::vector<std::size_t>& window_ids) const;
  /// Hidden vectors [n, d_h] for every token of the sentence.
  Tensor encode_sentence(const Sentence& sentence) const;

  /// Trainable parameters; the embedding table is omitted when frozen.
  std::vector<Tensor> parameters() const;

  /// Deep copy whose parameters never require grad.
  Encoder snapshot() const;
  /// Deep copy with the same trainability.
  Encoder clone() const;
  /// Copies every parameter value from other, keeping this encoder's
  /// trainability flags.
  void restore(const Encoder& other);

  void save(const std::filesystem::path& path) const;
  static Encoder load(const std::filesystem::path& path);

  bool same_values(const Encoder& other) const;

 private:
  void set_trainable(bool trainable);

  Vocabulary vocab_;
  std::size_t window_ = 0;
  std::string nonlinearity_ = "tanh";
  bool train_embeddings_ = true;
  Tensor embedding_;
  Tensor mix_weight_;
  Tensor mix_bias_;
  Tensor out_weight_;
  Tensor out_bias_;
};

}  // namespace muco
