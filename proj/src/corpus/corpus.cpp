#include "muco/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace muco {

std::string tag_class(const std::string& tag) {
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return tag.substr(2);
  return "";
}

bool is_begin(const std::string& tag) { return tag.size() > 2 && tag.starts_with("B-"); }
bool is_inside(const std::string& tag) { return tag.size() > 2 && tag.starts_with("I-"); }

bool is_mined_tag(const std::string& tag) { return tag_class(tag).starts_with("o_"); }

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    const std::string cls = tag_class(tags[i]);
    if (cls.empty()) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tags.size() && is_inside(tags[j]) && tag_class(tags[j]) == cls) ++j;
    spans.push_back(Span{i, j, cls});
    i = j;
  }
  return spans;
}

bool is_well_formed(const std::vector<std::string>& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!is_inside(tags[i])) continue;
    if (i == 0 || tag_class(tags[i - 1]) != tag_class(tags[i])) return false;
  }
  return true;
}

std::vector<std::string> classes_to_bio(const std::vector<std::string>& classes) {
  std::vector<std::string> tags;
  tags.reserve(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].empty()) {
      tags.emplace_back(kOutsideTag);
    } else if (i > 0 && classes[i - 1] == classes[i]) {
      tags.push_back("I-" + classes[i]);
    } else {
      tags.push_back("B-" + classes[i]);
    }
  }
  return tags;
}

std::vector<std::string> Corpus::classes() const {
  std::set<std::string> names;
  for (const auto& s : sentences)
    for (const auto& t : s.tags)
      if (auto c = tag_class(t); !c.empty()) names.insert(c);
  return {names.begin(), names.end()};
}

std::map<std::string, std::size_t> Corpus::entity_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& span : extract_spans(s.tags)) ++counts[span.cls];
  return counts;
}

Corpus load_bio(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  Corpus corpus;
  LoadReport local;
  Sentence current;
  std::size_t line_no = 0;
  std::string line;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    for (std::size_t i = 0; i < current.tags.size(); ++i) {
      auto& tag = current.tags[i];
      if (is_inside(tag) && (i == 0 || tag_class(current.tags[i - 1]) != tag_class(tag))) {
        tag[0] = 'B';
        ++local.repaired_tags;
      }
    }
    local.tokens += current.tokens.size();
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size()) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected 'token<TAB>tag'");
    }
    std::string tag = line.substr(tab + 1);
    if (tag != kOutsideTag && tag_class(tag).empty()) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": malformed tag '" + tag + "'");
    }
    current.tokens.push_back(line.substr(0, tab));
    current.tags.push_back(std::move(tag));
  }
  flush();
  if (corpus.sentences.empty()) throw std::runtime_error("corpus " + path.string() + " is empty");
  local.sentences = corpus.sentences.size();
  if (report) *report = local;
  return corpus;
}

void write_bio(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    if (s) out << '\n';
    const auto& sent = corpus.sentences[s];
    for (std::size_t i = 0; i < sent.size(); ++i) out << sent.tokens[i] << '\t' << sent.tags[i] << '\n';
  }
}

ClassSplit split_classes(const Corpus& corpus, const EmbeddingTable& embeddings, double fraction) {
  if (fraction < 0.0) throw std::invalid_argument("split fraction must be nonnegative");
  const std::size_t dim = embeddings.table.cols();
  const auto table = embeddings.table.values();
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto cls = tag_class(s.tags[i]);
      if (cls.empty()) continue;
      auto& acc = sums[cls];
      acc.resize(dim, 0.0);
      const auto id = embeddings.vocab.find(s.tokens[i]);
      if (!id) continue;
      for (std::size_t c = 0; c < dim; ++c) acc[c] += table[*id * dim + c];
      ++counts[cls];
    }
  }
  std::vector<std::string> remaining;
  std::map<std::string, std::vector<double>> unit;
  for (auto& [cls, acc] : sums) {
    if (counts[cls] == 0) throw std::invalid_argument("class '" + cls + "' has no embeddable tokens");
    double sq = 0.0;
    for (double v : acc) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw std::invalid_argument("class '" + cls + "' has a zero mean embedding");
    for (auto& v : acc) v /= norm;
    unit[cls] = acc;
    remaining.push_back(cls);
  }

  ClassSplit split;
  auto score_all = [&] {
    std::map<std::string, double> scores;
    for (const auto& a : remaining) {
      double total = 0.0;
      for (const auto& b : remaining) {
        if (a == b) continue;
        total += 1.0 - std::inner_product(unit[a].begin(), unit[a].end(), unit[b].begin(), 0.0);
      }
      scores[a] = remaining.size() > 1 ? total / static_cast<double>(remaining.size() - 1) : 0.0;
    }
    return scores;
  };
  while (!remaining.empty() &&
         static_cast<double>(split.few_shot.size()) <
             fraction * static_cast<double>(remaining.size())) {
    const auto scores = score_all();
    // remaining is sorted, so the first maximum is the alphabetically smallest
    std::string best = remaining.front();
    for (const auto& c : remaining)
      if (scores.at(c) > scores.at(best)) best = c;
    split.dissimilarity[best] = scores.at(best);
    split.few_shot.push_back(best);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
  }
  for (const auto& [cls, score] : score_all()) split.dissimilarity[cls] = score;
  split.base = remaining;
  return split;
}

void write_split(const ClassSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split " + path.string());
  out << std::setprecision(17);
  for (const auto& c : split.base) out << "base\t" << c << '\t' << split.dissimilarity.at(c) << '\n';
  for (const auto& c : split.few_shot) out << "few\t" << c << '\t' << split.dissimilarity.at(c) << '\n';
}

ClassSplit read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split " + path.string());
  ClassSplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string kind;
    std::string cls;
    double score = 0.0;
    if (!(fields >> kind >> cls >> score) || (kind != "base" && kind != "few")) {
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected 'base|few<TAB>class<TAB>score'");
    }
    (kind == "base" ? split.base : split.few_shot).push_back(cls);
    split.dissimilarity[cls] = score;
  }
  return split;
}

Episode sample_episode(const Corpus& corpus, const ClassSplit& split, std::size_t k,
                       std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("K must be positive");
  if (split.few_shot.empty()) throw std::invalid_argument("split has no few-shot classes");
  const std::set<std::string> few(split.few_shot.begin(), split.few_shot.end());
  const auto totals = corpus.entity_counts();
  for (const auto& c : split.few_shot) {
    const auto it = totals.find(c);
    const std::size_t have = it == totals.end() ? 0 : it->second;
    if (have < k) {
      throw std::invalid_argument("infeasible K=" + std::to_string(k) + ": class '" + c +
                                  "' has only " + std::to_string(have) + " entities");
    }
  }
  std::vector<std::size_t> candidates;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    for (const auto& span : extract_spans(corpus.sentences[s].tags)) {
      if (few.count(span.cls)) {
        candidates.push_back(s);
        break;
      }
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> order = candidates;
  std::shuffle(order.begin(), order.end(), rng);

  std::map<std::string, std::size_t> have;
  auto satisfied = [&] {
    return std::all_of(split.few_shot.begin(), split.few_shot.end(),
                       [&](const std::string& c) { return have[c] >= k; });
  };
  Episode ep;
  ep.k = k;
  std::set<std::size_t> chosen;
  for (std::size_t s : order) {
    if (satisfied()) break;
    const auto spans = extract_spans(corpus.sentences[s].tags);
    const bool helps = std::any_of(spans.begin(), spans.end(), [&](const Span& sp) {
      return few.count(sp.cls) && have[sp.cls] < k;
    });
    if (!helps) continue;
    chosen.insert(s);
    for (const auto& sp : spans)
      if (few.count(sp.cls)) ++have[sp.cls];
  }
  ep.support.assign(chosen.begin(), chosen.end());
  for (std::size_t s : candidates)
    if (!chosen.count(s)) ep.query.push_back(s);
  return ep;
}

}  // namespace muco
