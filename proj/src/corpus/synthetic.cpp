#include "muco/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "muco/util/config.hpp"

namespace muco {

namespace {

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  while (sq == 0.0) {
    sq = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      sq += x * x;
    }
  }
  const double norm = std::sqrt(sq);
  for (auto& x : v) x /= norm;
  return v;
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

constexpr std::size_t kPlacementAttempts = 10000;

}  // namespace

void SyntheticSpec::validate() const {
  if (predefined == 0) throw ConfigError("predefined must be at least 1");
  if (dim == 0) throw ConfigError("dim must be positive");
  if (!(separation > 0.0)) throw ConfigError("separation must be positive");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (center_radius < 0.0 || noise_radius < 0.0 || latent_proximity < 0.0) {
    throw ConfigError("radii and latent_proximity must be nonnegative");
  }
  if (types_per_class == 0) throw ConfigError("types_per_class must be positive");
  if (min_segments == 0 || max_segments < min_segments) {
    throw ConfigError("need 1 <= min_segments <= max_segments");
  }
  if (max_entity_length == 0) throw ConfigError("max_entity_length must be positive");
  for (double r : {entity_rate, latent_rate, noise_rate, correlation_rate}) {
    if (r < 0.0 || r > 1.0) throw ConfigError("rates must lie in [0, 1]");
  }
  if (entity_rate + latent_rate + noise_rate > 1.0 + 1e-12) {
    throw ConfigError("entity_rate + latent_rate + noise_rate exceeds 1");
  }
  if (latent_rate > 0.0 && latent == 0) throw ConfigError("latent_rate > 0 needs latent classes");
  if (entity_rate + latent_rate < 1.0 && noise_types == 0) {
    throw ConfigError("noise segments need noise_types > 0");
  }
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  ConfigBinder b;
  b.bind("predefined", spec.predefined);
  b.bind("latent", spec.latent);
  b.bind("noise_types", spec.noise_types);
  b.bind("dim", spec.dim);
  b.bind("separation", spec.separation);
  b.bind("sigma", spec.sigma);
  b.bind("center_radius", spec.center_radius);
  b.bind("noise_radius", spec.noise_radius);
  b.bind("latent_proximity", spec.latent_proximity);
  b.bind("types_per_class", spec.types_per_class);
  b.bind("sentences", spec.sentences);
  b.bind("min_segments", spec.min_segments);
  b.bind("max_segments", spec.max_segments);
  b.bind("max_entity_length", spec.max_entity_length);
  b.bind("entity_rate", spec.entity_rate);
  b.bind("latent_rate", spec.latent_rate);
  b.bind("noise_rate", spec.noise_rate);
  b.bind("correlation_rate", spec.correlation_rate);
  b.bind("seed", spec.seed);
  b.apply(parse_config(text));
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  return parse_synthetic_spec(read_text_file(path));
}

std::optional<std::size_t> correlated_predefined(const SyntheticSpec& spec, std::size_t k) {
  if (k >= spec.latent) return std::nullopt;
  const auto shifted = static_cast<std::ptrdiff_t>(spec.predefined) -
                       static_cast<std::ptrdiff_t>(spec.latent) + static_cast<std::ptrdiff_t>(k);
  if (shifted < 0) return std::nullopt;
  return static_cast<std::size_t>(shifted);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n_classes = spec.predefined + spec.latent;
  const double min_dist = spec.separation * spec.sigma;
  const double radius =
      (spec.center_radius > 0.0 ? spec.center_radius : 0.9 * spec.separation) * spec.sigma;

  SyntheticData data;
  for (std::size_t c = 0; c < spec.predefined; ++c) data.class_names.push_back("C" + std::to_string(c));
  for (std::size_t k = 0; k < spec.latent; ++k) data.class_names.push_back("U" + std::to_string(k));

  bool placed = false;
  for (std::size_t attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
    std::vector<std::vector<double>> centers;
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::vector<double> center;
      const auto partner = c >= spec.predefined ? correlated_predefined(spec, c - spec.predefined)
                                                : std::nullopt;
      if (partner && spec.latent_proximity > 0.0) {
        center = centers[*partner];
        const auto u = random_direction(rng, spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) center[i] += u[i] * min_dist * spec.latent_proximity;
      } else {
        center = random_direction(rng, spec.dim);
        for (auto& x : center) x *= radius;
      }
      centers.push_back(std::move(center));
    }
    placed = true;
    for (std::size_t a = 0; a < n_classes && placed; ++a)
      for (std::size_t b = a + 1; b < n_classes && placed; ++b)
        if (euclidean(centers[a], centers[b]) < min_dist * (1.0 - 1e-12)) placed = false;
    if (placed) data.centers = std::move(centers);
  }
  if (!placed) {
    throw std::runtime_error("infeasible center placement: " + std::to_string(n_classes) +
                             " classes at separation " + std::to_string(spec.separation) +
                             " in dimension " + std::to_string(spec.dim));
  }

  std::uniform_real_distribution<double> special(-0.1, 0.1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> rows;
  for (std::size_t i = 0; i < 2 * spec.dim; ++i) rows.push_back(special(rng));
  auto& vocab = data.embeddings.vocab;
  std::vector<std::vector<std::size_t>> class_tokens(n_classes);
  const double jitter = spec.sigma / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t c = 0; c < n_classes; ++c) {
    const bool is_latent = c >= spec.predefined;
    const std::size_t local = is_latent ? c - spec.predefined : c;
    for (std::size_t t = 0; t < spec.types_per_class; ++t) {
      const std::string name = (is_latent ? "u" : "c") + std::to_string(local) + "_" + std::to_string(t);
      class_tokens[c].push_back(vocab.add(name));
      data.token_class[name] = data.class_names[c];
      for (std::size_t i = 0; i < spec.dim; ++i) rows.push_back(data.centers[c][i] + jitter * normal(rng));
    }
  }
  std::vector<std::size_t> noise_tokens;
  for (std::size_t t = 0; t < spec.noise_types; ++t) {
    noise_tokens.push_back(vocab.add("n" + std::to_string(t)));
    std::vector<double> v;
    bool clear = false;
    for (std::size_t attempt = 0; attempt < kPlacementAttempts && !clear; ++attempt) {
      v = random_direction(rng, spec.dim);
      for (auto& x : v) x *= spec.noise_radius * spec.sigma;
      clear = std::all_of(data.centers.begin(), data.centers.end(),
                          [&](const auto& c) { return euclidean(v, c) >= min_dist; });
    }
    if (!clear) {
      throw std::runtime_error("infeasible noise placement: no point at radius " +
                               std::to_string(spec.noise_radius) + " is " +
                               std::to_string(spec.separation) + " sigma from every center");
    }
    rows.insert(rows.end(), v.begin(), v.end());
  }
  // Noise words form a long tail: types are used in a seeded order and only
  // repeat once all of them have appeared.
  std::shuffle(noise_tokens.begin(), noise_tokens.end(), rng);
  std::size_t next_noise = 0;
  data.embeddings.table = Tensor({vocab.size(), spec.dim}, std::move(rows));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](const std::vector<std::size_t>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };
  for (std::size_t s = 0; s < spec.sentences; ++s) {
    Sentence sent;
    std::vector<std::string> latent;
    auto emit = [&](std::size_t token, std::string tag, std::string label) {
      sent.tokens.push_back(vocab.token(token));
      sent.tags.push_back(std::move(tag));
      latent.push_back(std::move(label));
    };
    const std::size_t segments =
        std::uniform_int_distribution<std::size_t>(spec.min_segments, spec.max_segments)(rng);
    for (std::size_t seg = 0; seg < segments; ++seg) {
      const double u = unit(rng);
      if (u < spec.entity_rate) {
        const std::size_t c = std::uniform_int_distribution<std::size_t>(0, spec.predefined - 1)(rng);
        for (std::size_t k = 0; k < spec.latent; ++k) {
          if (correlated_predefined(spec, k) == c && unit(rng) < spec.correlation_rate) {
            emit(pick(class_tokens[spec.predefined + k]), kOutsideTag,
                 data.class_names[spec.predefined + k]);
          }
        }
        const std::size_t length =
            std::uniform_int_distribution<std::size_t>(1, spec.max_entity_length)(rng);
        for (std::size_t i = 0; i < length; ++i) {
          emit(pick(class_tokens[c]), (i == 0 ? "B-" : "I-") + data.class_names[c], "");
        }
      } else if (u < spec.entity_rate + spec.latent_rate) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, spec.latent - 1)(rng);
        emit(pick(class_tokens[spec.predefined + k]), kOutsideTag,
             data.class_names[spec.predefined + k]);
      } else {
        emit(noise_tokens[next_noise++ % noise_tokens.size()], kOutsideTag, kNoiseLabel);
      }
    }
    data.corpus.sentences.push_back(std::move(sent));
    data.latent.push_back(std::move(latent));
  }
  return data;
}

void write_latent_sidecar(const SyntheticData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sidecar " + path.string());
  for (std::size_t s = 0; s < data.latent.size(); ++s)
    for (std::size_t i = 0; i < data.latent[s].size(); ++i)
      if (!data.latent[s][i].empty()) out << s << '\t' << i << '\t' << data.latent[s][i] << '\n';
}

std::map<std::pair<std::size_t, std::size_t>, std::string> read_latent_sidecar(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sidecar " + path.string());
  std::map<std::pair<std::size_t, std::size_t>, std::string> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t s = 0;
    std::size_t i = 0;
    std::string label;
    if (!(fields >> s >> i >> label)) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected 'sentence<TAB>index<TAB>label'");
    }
    rows[{s, i}] = label;
  }
  return rows;
}

void write_embeddings(const EmbeddingTable& embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings " + path.string());
  out << std::setprecision(17);
  const std::size_t d = embeddings.table.cols();
  for (std::size_t id = 2; id < embeddings.vocab.size(); ++id) {
    out << embeddings.vocab.token(id);
    for (std::size_t c = 0; c < d; ++c) out << ' ' << embeddings.table.at(id, c);
    out << '\n';
  }
}

}  // namespace muco
