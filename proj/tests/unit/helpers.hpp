#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "muco/corpus/corpus.hpp"
#include "muco/corpus/synthetic.hpp"
#include "muco/encoder/encoder.hpp"

namespace muco::fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("muco_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Sentence sentence(std::vector<std::string> tokens, std::vector<std::string> tags = {}) {
  if (tags.empty()) tags.assign(tokens.size(), "O");
  return Sentence{std::move(tokens), std::move(tags)};
}

inline Vocabulary vocab_of(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

inline EncoderConfig small_config(std::size_t embed = 4, std::size_t hidden = 5, std::size_t window = 1) {
  EncoderConfig c;
  c.embed_dim = embed;
  c.hidden_dim = hidden;
  c.window = window;
  return c;
}

// Separable synthetic set used by several suites: 6 sigma, no noise-heavy mix.
inline SyntheticSpec separable_spec(std::uint64_t seed, std::size_t predefined = 3,
                                    std::size_t latent = 3) {
  SyntheticSpec s;
  s.predefined = predefined;
  s.latent = latent;
  s.separation = 6.0;
  s.sentences = 300;
  s.seed = seed;
  return s;
}

}  // namespace muco::fixture
