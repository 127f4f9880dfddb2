#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "muco/encoder/encoder.hpp"

namespace muco {

inline constexpr const char* kOutsideTag = "O";

/// Class carried by a BIO tag, or "" for O.
std::string tag_class(const std::string& tag);
bool is_begin(const std::string& tag);
bool is_inside(const std::string& tag);
/// Tags of mined classes: B-o_k / I-o_k.
bool is_mined_tag(const std::string& tag);

/// Half-open token range [begin, end) of one entity.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string cls;

  auto operator<=>(const Span&) const = default;
};

/// Entities of a BIO sequence. An I- tag that does not continue a span of its
/// class starts a new one.
std::vector<Span> extract_spans(const std::vector<std::string>& tags);

/// Every I-X follows a B-X or I-X.
bool is_well_formed(const std::vector<std::string>& tags);

/// Per-token classes ("" for outside) to BIO: a class change or sentence
/// start opens B-, a continuation emits I-.
std::vector<std::string> classes_to_bio(const std::vector<std::string>& classes);

struct Corpus {
  std::vector<Sentence> sentences;

  /// Sorted class names appearing in the tags.
  std::vector<std::string> classes() const;
  std::map<std::string, std::size_t> entity_counts() const;
  bool operator==(const Corpus&) const = default;
};

struct LoadReport {
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t repaired_tags = 0;  // orphan I- promoted to B-
};

/// `token TAB tag` lines, blank line between sentences.
Corpus load_bio(const std::filesystem::path& path, LoadReport* report = nullptr);
void write_bio(const Corpus& corpus, const std::filesystem::path& path);

struct ClassSplit {
  std::vector<std::string> base;
  std::vector<std::string> few_shot;  // in selection order
  std::map<std::string, double> dissimilarity;  // score when each class was chosen or last scored

  bool operator==(const ClassSplit&) const = default;
};

/// Moves the remaining class with the largest mean cosine dissimilarity to
/// the other remaining classes into the few-shot set until
/// |few_shot| >= fraction * |base|. Class vectors are mean embeddings of
/// entity tokens; ties go to the alphabetically smaller name.
ClassSplit split_classes(const Corpus& corpus, const EmbeddingTable& embeddings, double fraction);

void write_split(const ClassSplit& split, const std::filesystem::path& path);
ClassSplit read_split(const std::filesystem::path& path);

struct Episode {
  std::vector<std::size_t> support;  // sentence ids
  std::vector<std::size_t> query;
  std::size_t k = 0;
};

/// Greedy support selection over a seeded shuffle of the sentences holding
/// few-shot entities: a sentence is taken when it adds an entity of a class
/// still below K. The rest of those sentences form the query set.
Episode sample_episode(const Corpus& corpus, const ClassSplit& split, std::size_t k,
                       std::uint64_t seed);

}  // namespace muco
