#include "muco/miner/miner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "muco/grad/ops.hpp"
#include "muco/grad/sgd.hpp"

namespace muco {

namespace {

constexpr std::size_t kEncodeChunk = 512;

// Encodes (sentence, index) occurrences in chunks without recording.
Tensor encode_occurrences(const std::vector<std::pair<const Sentence*, std::size_t>>& items,
                          const Encoder& encoder) {
  grad::NoGradGuard guard;
  const std::size_t d = encoder.hidden_dim();
  std::vector<double> out;
  out.reserve(items.size() * d);
  std::vector<std::size_t> windows;
  std::map<const Sentence*, std::vector<std::size_t>> id_cache;
  for (std::size_t start = 0; start < items.size(); start += kEncodeChunk) {
    windows.clear();
    const std::size_t end = std::min(items.size(), start + kEncodeChunk);
    for (std::size_t i = start; i < end; ++i) {
      auto [sentence, index] = items[i];
      auto it = id_cache.find(sentence);
      if (it == id_cache.end()) it = id_cache.emplace(sentence, encoder.token_ids(*sentence)).first;
      const auto w = encoder.window_ids(it->second, index);
      windows.insert(windows.end(), w.begin(), w.end());
    }
    const auto h = encoder.encode_windows(windows);
    out.insert(out.end(), h.values().begin(), h.values().end());
  }
  return Tensor({items.size(), d}, std::move(out));
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;  // the smaller index stays the root
  }

 private:
  std::vector<std::size_t> parent_;
};

std::string mined_name(std::size_t k) { return "o_" + std::to_string(k + 1); }

// Orders groups by decreasing size, ties by smallest member, and fills in the
// assignment's names and hard labels. groups hold token positions.
void name_groups(std::vector<std::vector<std::size_t>> groups, GroupAssignment& out) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  out.hard.assign(out.tokens.size(), kIrrelevant);
  out.class_names.clear();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    out.class_names.push_back(mined_name(k));
    for (std::size_t t : groups[k]) out.hard[t] = k;
  }
  out.soft.assign(out.tokens.size(), {});
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Tensor pair_feature(const Tensor& h_i, const Tensor& h_j, const Tensor& t_i, const Tensor& t_j) {
  return grad::concat({h_i, h_j, t_i, t_j, grad::abs_diff(h_i, h_j), grad::abs_diff(t_i, t_j),
                       grad::abs_diff(h_i, t_i), grad::abs_diff(h_j, t_j)});
}

Tensor pair_feature(const Sentence& s_i, std::size_t i, const Sentence& s_j, std::size_t j,
                    const Encoder& frozen, const Encoder& live) {
  return pair_feature(frozen.encode(s_i, i), frozen.encode(s_j, j), live.encode(s_i, i),
                      live.encode(s_j, j));
}

GroupClassifier GroupClassifier::zeros(std::size_t hidden_dim, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  GroupClassifier c;
  c.weight = Tensor::zeros({8 * hidden_dim});
  c.bias = Tensor::zeros({1});
  c.gamma = gamma;
  return c;
}

double GroupClassifier::logit(const Tensor& feature) const {
  if (feature.size() != weight.size()) {
    throw grad::DimensionError("pair feature has " + std::to_string(feature.size()) +
                               " entries, classifier expects " + std::to_string(weight.size()));
  }
  return dot(feature.values().data(), weight.values().data(), weight.size()) + bias.item();
}

double pair_score(const GroupClassifier& classifier, const Tensor& feature_ij,
                  const Tensor& feature_ji) {
  return grad::sigmoid(0.5 * (classifier.logit(feature_ij) + classifier.logit(feature_ji)));
}

GroupClassifier train_step2(const std::vector<LabeledExample>& examples, const Encoder& frozen,
                            const Encoder& live, const Step2Config& config) {
  std::map<std::string, std::size_t> class_ids;
  for (const auto& ex : examples) class_ids.emplace(ex.label, class_ids.size());
  if (examples.size() < 2 || class_ids.size() < 2) {
    throw std::invalid_argument("train_step2 needs at least two classes to form negative pairs");
  }
  if (config.batch_size < 2) throw std::invalid_argument("step-2 batch needs at least 2 pairs");
  const std::size_t n = examples.size();
  const std::size_t d = live.hidden_dim();
  std::vector<std::pair<const Sentence*, std::size_t>> items;
  std::vector<std::size_t> label(n);
  std::vector<std::vector<std::size_t>> members(class_ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    items.emplace_back(examples[i].sentence, examples[i].index);
    label[i] = class_ids.at(examples[i].label);
    members[label[i]].push_back(i);
  }
  const Tensor h = encode_occurrences(items, frozen);
  const Tensor t = encode_occurrences(items, live);
  const auto hv = h.values();
  const auto tv = t.values();

  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> any(0, n - 1);

  // The averaged (i,j)/(j,i) feature repeats blocks 0/1, 2/3 and 6/7, so their
  // weights start equal and receive equal gradients. Train the five distinct
  // blocks and expand at the end: logit = w.[2hm; 2tm; |dh|; |dt|; 2x] + b.
  constexpr std::array<double, 5> kMultiplicity{2.0, 2.0, 1.0, 1.0, 2.0};
  const std::size_t width = 5 * d;
  std::vector<double> w(width, 0.0);
  double b = 0.0;
  auto write_feature = [&](std::size_t i, std::size_t j, double* f) {
    const double* hi = hv.data() + i * d;
    const double* hj = hv.data() + j * d;
    const double* ti = tv.data() + i * d;
    const double* tj = tv.data() + j * d;
    for (std::size_t k = 0; k < d; ++k) {
      f[k] = 0.5 * (hi[k] + hj[k]);
      f[d + k] = 0.5 * (ti[k] + tj[k]);
      f[2 * d + k] = std::abs(hi[k] - hj[k]);
      f[3 * d + k] = std::abs(ti[k] - tj[k]);
      f[4 * d + k] = 0.5 * (std::abs(hi[k] - ti[k]) + std::abs(hj[k] - tj[k]));
    }
  };
  auto logit = [&](const double* f) {
    double z = b;
    for (std::size_t blk = 0; blk < 5; ++blk) {
      double part = 0.0;
      for (std::size_t k = blk * d; k < (blk + 1) * d; ++k) part += w[k] * f[k];
      z += kMultiplicity[blk] * part;
    }
    return z;
  };

  const std::size_t pairs = config.pairs_per_example * n;
  const std::size_t half = config.batch_size / 2;
  std::vector<double> features(2 * half * width);
  std::vector<double> labels(2 * half);
  std::vector<double> gw(width);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t done = 0; done < pairs; done += 2 * half) {
      const std::size_t m = std::min(half, (pairs - done + 1) / 2);
      for (std::size_t p = 0; p < m; ++p) {
        const std::size_t i = any(rng);
        const auto& same = members[label[i]];
        const std::size_t j =
            same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
        write_feature(i, j, features.data() + (2 * p) * width);
        labels[2 * p] = config.invert_labels ? 0.0 : 1.0;
        const std::size_t a = any(rng);
        std::size_t c = any(rng);
        while (label[c] == label[a]) c = any(rng);
        write_feature(a, c, features.data() + (2 * p + 1) * width);
        labels[2 * p + 1] = config.invert_labels ? 1.0 : 0.0;
      }
      // Mean binary cross-entropy: d/dz = (sigmoid(z) - y) / batch.
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      const double inv = 1.0 / static_cast<double>(2 * m);
      for (std::size_t p = 0; p < 2 * m; ++p) {
        const double* f = features.data() + p * width;
        const double g = (grad::sigmoid(logit(f)) - labels[p]) * inv;
        gb += g;
        for (std::size_t k = 0; k < width; ++k) gw[k] += g * f[k];
      }
      for (std::size_t k = 0; k < width; ++k) w[k] -= config.learning_rate * gw[k];
      b -= config.learning_rate * gb;
    }
  }
  static constexpr std::array<std::size_t, 8> kSource{0, 0, 1, 1, 2, 3, 4, 4};
  std::vector<double> full(8 * d);
  for (std::size_t blk = 0; blk < 8; ++blk)
    for (std::size_t k = 0; k < d; ++k) full[blk * d + k] = w[kSource[blk] * d + k];
  GroupClassifier out;
  out.weight = Tensor({8 * d}, std::move(full));
  out.bias = Tensor({1}, {b});
  return out;
}

std::vector<TokenRef> sample_o_candidates(const Corpus& corpus,
                                          const std::vector<std::size_t>& sentences,
                                          std::size_t max_size, std::uint64_t seed) {
  std::vector<TokenRef> all;
  for (std::size_t s : sentences) {
    const auto& sent = corpus.sentences.at(s);
    for (std::size_t i = 0; i < sent.size(); ++i)
      if (sent.tags[i] == kOutsideTag) all.push_back({s, i});
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (all.size() <= max_size) return all;
  Rng rng(seed);
  std::vector<TokenRef> sample;
  std::sample(all.begin(), all.end(), std::back_inserter(sample), max_size, rng);
  std::sort(sample.begin(), sample.end());
  return sample;
}

CandidateEncodings encode_tokens(const Corpus& corpus, const std::vector<TokenRef>& tokens,
                                 const Encoder& frozen, const Encoder& live) {
  std::vector<std::pair<const Sentence*, std::size_t>> items;
  items.reserve(tokens.size());
  for (const auto& t : tokens) items.emplace_back(&corpus.sentences.at(t.sentence), t.index);
  return {encode_occurrences(items, frozen), encode_occurrences(items, live)};
}

PairScoreMatrix::PairScoreMatrix(const GroupClassifier& classifier, const Corpus& corpus,
                                 std::vector<TokenRef> candidates, const Encoder& frozen,
                                 const Encoder& live)
    : candidates_(std::move(candidates)) {
  std::sort(candidates_.begin(), candidates_.end());
  if (std::adjacent_find(candidates_.begin(), candidates_.end()) != candidates_.end()) {
    throw std::invalid_argument("candidate set contains duplicates");
  }
  const std::size_t m = candidates_.size();
  const std::size_t d = classifier.hidden_dim();
  if (live.hidden_dim() != d || frozen.hidden_dim() != d) {
    throw grad::DimensionError("group classifier and encoders disagree on d_h");
  }
  scores_.assign(m * m, 0.0);
  if (m == 0) return;
  const auto enc = encode_tokens(corpus, candidates_, frozen, live);
  const double* h = enc.frozen.values().data();
  const double* t = enc.live.values().data();
  const double* w = classifier.weight.values().data();
  const double b = classifier.bias.item();

  // Per-token part of the symmetrized logit: half of the sum of both
  // orientations' token-only blocks.
  std::vector<double> u(m);
  std::vector<double> cross(d);
  for (std::size_t i = 0; i < m; ++i) {
    const double* hi = h + i * d;
    const double* ti = t + i * d;
    for (std::size_t k = 0; k < d; ++k) cross[k] = std::abs(hi[k] - ti[k]);
    const double a = dot(w, hi, d) + dot(w + 2 * d, ti, d) + dot(w + 6 * d, cross.data(), d);
    const double c = dot(w + d, hi, d) + dot(w + 3 * d, ti, d) + dot(w + 7 * d, cross.data(), d);
    u[i] = 0.5 * (a + c);
  }
  const double* w5 = w + 4 * d;
  const double* w6 = w + 5 * d;
  for (std::size_t i = 0; i < m; ++i) {
    const double* hi = h + i * d;
    const double* ti = t + i * d;
    for (std::size_t j = i; j < m; ++j) {
      const double* hj = h + j * d;
      const double* tj = t + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += w5[k] * std::abs(hi[k] - hj[k]) + w6[k] * std::abs(ti[k] - tj[k]);
      const double score = grad::sigmoid(u[i] + u[j] + s + b);
      scores_[i * m + j] = score;
      scores_[j * m + i] = score;
    }
  }
}

std::vector<std::pair<std::size_t, Span>> GroupAssignment::spans() const {
  std::vector<std::pair<std::size_t, Span>> out;
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    if (hard[p] == kIrrelevant) continue;
    const auto& tok = tokens[p];
    if (!out.empty()) {
      auto& [sentence, span] = out.back();
      if (sentence == tok.sentence && span.end == tok.index && span.cls == class_names[hard[p]]) {
        ++span.end;
        continue;
      }
    }
    out.push_back({tok.sentence, Span{tok.index, tok.index + 1, class_names[hard[p]]}});
  }
  return out;
}

std::vector<std::size_t> GroupAssignment::class_sizes() const {
  std::vector<std::size_t> sizes(class_names.size(), 0);
  for (auto h : hard)
    if (h != kIrrelevant) ++sizes[h];
  return sizes;
}

GroupAssignment mine(const PairScoreMatrix& scores, double gamma, std::size_t min_size) {
  const std::size_t m = scores.size();
  UnionFind uf(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (scores(i, j) > gamma) uf.unite(i, j);
  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < m; ++i) components[uf.find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [root, members] : components)
    if (members.size() >= std::max<std::size_t>(min_size, 1)) groups.push_back(std::move(members));
  GroupAssignment out;
  out.tokens = scores.candidates();
  name_groups(std::move(groups), out);
  return out;
}

GroupAssignment mine(const GroupClassifier& classifier, const Corpus& corpus,
                     const std::vector<TokenRef>& candidates, const Encoder& frozen,
                     const Encoder& live, double gamma, std::size_t min_size) {
  if (candidates.empty()) throw std::invalid_argument("mine: no candidates");
  return mine(PairScoreMatrix(classifier, corpus, candidates, frozen, live), gamma, min_size);
}

void soft_label(GroupAssignment& assignment, const Corpus& corpus, const Encoder& live) {
  const std::size_t r = assignment.class_count();
  if (r == 0) throw std::invalid_argument("soft_label: no mined classes");
  std::vector<TokenRef> members;
  std::vector<std::size_t> positions;
  for (std::size_t p = 0; p < assignment.tokens.size(); ++p) {
    if (assignment.hard[p] == kIrrelevant) continue;
    members.push_back(assignment.tokens[p]);
    positions.push_back(p);
  }
  std::vector<std::pair<const Sentence*, std::size_t>> items;
  for (const auto& t : members) items.emplace_back(&corpus.sentences.at(t.sentence), t.index);
  const Tensor enc = encode_occurrences(items, live);
  const std::size_t d = live.hidden_dim();
  const auto v = enc.values();

  std::vector<double> centers(r * d, 0.0);
  std::vector<std::size_t> counts(r, 0);
  for (std::size_t q = 0; q < positions.size(); ++q) {
    const std::size_t k = assignment.hard[positions[q]];
    for (std::size_t c = 0; c < d; ++c) centers[k * d + c] += v[q * d + c];
    ++counts[k];
  }
  for (std::size_t k = 0; k < r; ++k) {
    if (counts[k] == 0) throw std::logic_error("soft_label: mined class " + assignment.class_names[k] + " is empty");
    for (std::size_t c = 0; c < d; ++c) centers[k * d + c] /= static_cast<double>(counts[k]);
  }
  grad::NoGradGuard guard;
  const Tensor cos = grad::matmul_nt(grad::l2_normalize(enc),
                                     grad::l2_normalize(Tensor({r, d}, std::move(centers))));
  assignment.soft.assign(assignment.tokens.size(), {});
  for (std::size_t q = 0; q < positions.size(); ++q) {
    assignment.soft[positions[q]] = grad::softmax(cos.values().subspan(q * r, r));
  }
}

namespace {

// Exact scan over every threshold: edges are added in decreasing score order
// and the class count is tracked per distinct score. Returns the gamma, placed
// midway between neighbouring scores, whose count is nearest target_r.
double sweep_gamma(const PairScoreMatrix& scores, std::size_t target_r, std::size_t min_size) {
  const std::size_t m = scores.size();
  const std::size_t floor_size = std::max<std::size_t>(min_size, 1);
  struct Edge {
    double score;
    std::uint32_t i;
    std::uint32_t j;
  };
  std::vector<Edge> edges;
  edges.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      edges.push_back({scores(i, j), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.score > b.score; });

  UnionFind uf(m);
  std::vector<std::size_t> size(m, 1);
  std::size_t count = floor_size <= 1 ? m : 0;
  auto gap = [&](std::size_t r) { return r > target_r ? r - target_r : target_r - r; };
  double best_gamma = edges.empty() ? 0.5 : 0.5 * (1.0 + edges.front().score);
  std::size_t best_gap = gap(count);
  for (std::size_t e = 0; e < edges.size();) {
    const double v = edges[e].score;
    for (; e < edges.size() && edges[e].score == v; ++e) {
      const std::size_t a = uf.find(edges[e].i);
      const std::size_t b = uf.find(edges[e].j);
      if (a == b) continue;
      count -= (size[a] >= floor_size) + (size[b] >= floor_size);
      uf.unite(a, b);
      const std::size_t root = uf.find(a);
      size[root] = size[a] + size[b];
      count += size[root] >= floor_size;
    }
    if (gap(count) < best_gap) {
      best_gap = gap(count);
      const double next = e < edges.size() ? edges[e].score : 0.0;
      best_gamma = 0.5 * (v + next);
    }
    if (best_gap == 0) break;
  }
  return best_gamma;
}

}  // namespace

double calibrate_gamma(const PairScoreMatrix& scores, std::size_t target_r, std::size_t min_size) {
  if (target_r == 0) throw std::invalid_argument("target_r must be at least 1");
  double lo = 0.0;
  double hi = 1.0;
  double best_gamma = 0.5;
  std::size_t best_gap = static_cast<std::size_t>(-1);
  for (int iter = 0; iter < 30; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const std::size_t r = mine(scores, mid, min_size).class_count();
    const std::size_t gap = r > target_r ? r - target_r : target_r - r;
    if (gap < best_gap) {
      best_gap = gap;
      best_gamma = mid;
    }
    if (gap == 0) return mid;
    // Higher thresholds cut edges and split components.
    if (r < target_r) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // The count is not monotone in gamma (high thresholds drop components below
  // min_size), so a missed target falls back to the exact scan.
  if (scores.size() < 2) return best_gamma;
  const double swept = sweep_gamma(scores, target_r, min_size);
  const std::size_t r = mine(scores, swept, min_size).class_count();
  return (r > target_r ? r - target_r : target_r - r) < best_gap ? swept : best_gamma;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                    std::size_t max_iterations, double tolerance) {
  if (k == 0) throw std::invalid_argument("k-means needs k >= 1");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  KMeansResult result;
  for (std::size_t idx : order) {
    if (result.centers.size() == k) break;
    if (std::find(result.centers.begin(), result.centers.end(), points[idx]) == result.centers.end()) {
      result.centers.push_back(points[idx]);
    }
  }
  if (result.centers.size() < k) {
    throw std::invalid_argument("k-means: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(result.centers.size()) + " distinct points");
  }
  const std::size_t d = points.empty() ? 0 : points.front().size();
  result.labels.assign(points.size(), 0);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    result.iterations = iter + 1;
    for (std::size_t p = 0; p < points.size(); ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = points[p][i] - result.centers[c][i];
          sq += diff * diff;
        }
        if (sq < best) {
          best = sq;
          result.labels[p] = c;
        }
      }
    }
    std::vector<std::vector<double>> next(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
      for (std::size_t i = 0; i < d; ++i) next[result.labels[p]][i] += points[p][i];
      ++counts[result.labels[p]];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next[c] = result.centers[c];
        continue;
      }
      double sq = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        next[c][i] /= static_cast<double>(counts[c]);
        sq += (next[c][i] - result.centers[c][i]) * (next[c][i] - result.centers[c][i]);
      }
      moved = std::max(moved, std::sqrt(sq));
    }
    result.centers = std::move(next);
    if (moved < tolerance) break;
  }
  return result;
}

GroupAssignment ws_baseline(const Corpus& corpus, const std::vector<TokenRef>& candidates,
                            const EmbeddingTable& embeddings, std::size_t k, std::uint64_t seed,
                            const Encoder& live) {
  if (k == 0) throw std::invalid_argument("ws_baseline: k must be at least 1");
  GroupAssignment out;
  out.tokens = candidates;
  std::sort(out.tokens.begin(), out.tokens.end());
  const std::size_t d = embeddings.table.cols();
  std::vector<std::vector<double>> points;
  points.reserve(out.tokens.size());
  for (const auto& t : out.tokens) {
    const auto& token = corpus.sentences.at(t.sentence).tokens.at(t.index);
    const std::size_t id = embeddings.vocab.id(token);
    const auto row = embeddings.table.values().subspan(id * d, d);
    points.emplace_back(row.begin(), row.end());
  }
  Rng rng(seed);
  const auto km = kmeans(points, k, rng);
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t p = 0; p < points.size(); ++p) groups[km.labels[p]].push_back(p);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  name_groups(std::move(groups), out);
  soft_label(out, corpus, live);
  return out;
}

void export_assignment(const GroupAssignment& assignment, const Corpus& corpus,
                       const std::filesystem::path& bio_path,
                       const std::filesystem::path& soft_path) {
  Corpus tagged = corpus;
  for (const auto& [s, span] : assignment.spans()) {
    auto& tags = tagged.sentences.at(s).tags;
    for (std::size_t i = span.begin; i < span.end; ++i) {
      tags.at(i) = (i == span.begin ? "B-" : "I-") + span.cls;
    }
  }
  write_bio(tagged, bio_path);
  std::ofstream out(soft_path);
  if (!out) throw std::runtime_error("cannot write " + soft_path.string());
  out << std::setprecision(17);
  for (std::size_t p = 0; p < assignment.tokens.size(); ++p) {
    if (assignment.hard[p] == kIrrelevant) continue;
    out << assignment.tokens[p].sentence << '\t' << assignment.tokens[p].index << '\t'
        << assignment.class_names[assignment.hard[p]];
    for (double v : assignment.soft[p]) out << '\t' << v;
    out << '\n';
  }
}

GroupAssignment import_assignment(const std::filesystem::path& soft_path) {
  std::ifstream in(soft_path);
  if (!in) throw std::runtime_error("cannot open " + soft_path.string());
  GroupAssignment out;
  std::map<TokenRef, std::pair<std::string, std::vector<double>>> rows;
  std::size_t r = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    TokenRef ref;
    std::string cls;
    if (!(fields >> ref.sentence >> ref.index >> cls) || !cls.starts_with("o_")) {
      throw std::runtime_error(soft_path.string() + " line " + std::to_string(line_no) +
                               ": expected 'sentence index o_k probs...'");
    }
    std::vector<double> probs;
    double v = 0.0;
    while (fields >> v) probs.push_back(v);
    if (r == 0) r = probs.size();
    if (probs.size() != r || r == 0) {
      throw std::runtime_error(soft_path.string() + " line " + std::to_string(line_no) +
                               ": soft row length differs");
    }
    rows[ref] = {cls, std::move(probs)};
  }
  for (std::size_t k = 0; k < r; ++k) out.class_names.push_back(mined_name(k));
  for (auto& [ref, row] : rows) {
    auto it = std::find(out.class_names.begin(), out.class_names.end(), row.first);
    if (it == out.class_names.end()) {
      throw std::runtime_error("soft-label table names unknown class " + row.first);
    }
    out.tokens.push_back(ref);
    out.hard.push_back(static_cast<std::size_t>(it - out.class_names.begin()));
    out.soft.push_back(std::move(row.second));
  }
  return out;
}

}  // namespace muco
