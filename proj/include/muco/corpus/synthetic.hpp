#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "muco/corpus/corpus.hpp"

namespace muco {

/// Latent label of a noise token in the sidecar.
inline constexpr const char* kNoiseLabel = "-";

/// Parameters of the synthetic token-classification benchmark.
///
/// Every predefined class C<i> and latent class U<k> owns `types_per_class`
/// token types whose embeddings are drawn around a class center. Noise token
/// types are scattered on a shell of radius noise_radius * sigma, at least
/// separation * sigma from every class center, and are emitted without
/// repetition until the noise vocabulary is exhausted. A sentence
/// is a shuffled sequence of segments; each segment is an entity (prob
/// entity_rate), a standalone latent token (latent_rate) or a noise token
/// (the remainder). With probability correlation_rate an entity is preceded
/// by a token of its correlated latent class.
struct SyntheticSpec {
  std::size_t predefined = 3;
  std::size_t latent = 3;
  std::size_t noise_types = 20000;
  std::size_t dim = 32;
  double separation = 6.0;  // minimum center distance, in units of sigma
  double sigma = 1.0;       // root-mean-square radius of a class cluster
  double center_radius = 0.0;  // center norm in units of sigma; 0 means 0.9 * separation
  double noise_radius = 5.0;
  // Distance of a latent center from its correlated predefined center in units
  // of separation * sigma; 0 places latent centers independently.
  double latent_proximity = 1.0;
  std::size_t types_per_class = 8;
  std::size_t sentences = 600;
  std::size_t min_segments = 4;
  std::size_t max_segments = 7;
  std::size_t max_entity_length = 2;
  double entity_rate = 0.27;
  double latent_rate = 0.18;
  // Declared noise share; the three rates may sum to at most 1 and any
  // remainder is noise as well.
  double noise_rate = 0.0;
  double correlation_rate = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// key = value lines; unknown keys are errors.
SyntheticSpec parse_synthetic_spec(const std::string& text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Correlated predefined class of latent class k, if any. Latent classes pair
/// with the last `latent` predefined classes in order.
std::optional<std::size_t> correlated_predefined(const SyntheticSpec& spec, std::size_t k);

struct SyntheticData {
  Corpus corpus;
  /// Per sentence and token: "" for entity tokens, kNoiseLabel for noise,
  /// otherwise the latent class name.
  std::vector<std::vector<std::string>> latent;
  EmbeddingTable embeddings;
  std::vector<std::string> class_names;     // predefined then latent
  std::vector<std::vector<double>> centers;  // aligned with class_names
  /// Token type name -> class name (noise types are absent).
  std::map<std::string, std::string> token_class;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

void write_latent_sidecar(const SyntheticData& data, const std::filesystem::path& path);
/// Rows `sentence_id TAB token_index TAB latent_class` for O tokens.
std::map<std::pair<std::size_t, std::size_t>, std::string> read_latent_sidecar(
    const std::filesystem::path& path);
void write_embeddings(const EmbeddingTable& embeddings, const std::filesystem::path& path);

}  // namespace muco
