#include "muco/eval/metrics.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace muco {

ScoreReport score(const std::vector<std::vector<std::string>>& gold,
                  const std::vector<std::vector<std::string>>& predicted,
                  const std::vector<std::string>& classes) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("score: " + std::to_string(gold.size()) + " gold sentences vs " +
                                std::to_string(predicted.size()) + " predicted");
  }
  std::map<std::string, ClassScore> by_class;
  for (const auto& c : classes) by_class[c].cls = c;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size()) {
      throw std::invalid_argument("score: sentence " + std::to_string(s) + " has " +
                                  std::to_string(gold[s].size()) + " gold tags and " +
                                  std::to_string(predicted[s].size()) + " predicted");
    }
    std::vector<std::string> mapped = predicted[s];
    for (auto& t : mapped)
      if (is_mined_tag(t)) t = kOutsideTag;
    const auto gold_spans = extract_spans(gold[s]);
    const auto pred_spans = extract_spans(mapped);
    const std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());
    for (const auto& sp : gold_spans)
      if (auto it = by_class.find(sp.cls); it != by_class.end()) ++it->second.gold;
    for (const auto& sp : pred_spans) {
      auto it = by_class.find(sp.cls);
      if (it == by_class.end()) continue;
      ++it->second.predicted;
      if (gold_set.count(sp)) ++it->second.correct;
    }
  }
  ScoreReport report;
  for (const auto& c : classes) {
    ClassScore cs = by_class.at(c);
    cs.precision = cs.predicted ? static_cast<double>(cs.correct) / static_cast<double>(cs.predicted) : 0.0;
    cs.recall = cs.gold ? static_cast<double>(cs.correct) / static_cast<double>(cs.gold) : 0.0;
    cs.f1 = cs.precision + cs.recall > 0.0
                ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall)
                : 0.0;
    report.macro_precision += cs.precision;
    report.macro_recall += cs.recall;
    report.macro_f1 += cs.f1;
    report.classes.push_back(cs);
  }
  if (!classes.empty()) {
    const double n = static_cast<double>(classes.size());
    report.macro_precision /= n;
    report.macro_recall /= n;
    report.macro_f1 /= n;
  }
  return report;
}

double adjusted_rand_index(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ARI: labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::string, std::string>, double> table;
  std::map<std::string, double> rows;
  std::map<std::string, double> cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, v] : table) index += pairs(v);
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& [key, v] : rows) sum_a += pairs(v);
  for (const auto& [key, v] : cols) sum_b += pairs(v);
  const double expected = sum_a * sum_b / pairs(static_cast<double>(n));
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (maximum - expected);
}

MiningReport mining_quality(const GroupAssignment& assignment,
                            const std::map<std::pair<std::size_t, std::size_t>, std::string>& latent) {
  MiningReport report;
  report.classes = assignment.class_count();
  std::vector<std::string> mined;
  std::vector<std::string> truth;
  std::vector<std::map<std::string, std::size_t>> per_class(report.classes);
  std::size_t irrelevant = 0;
  for (std::size_t p = 0; p < assignment.tokens.size(); ++p) {
    const auto& t = assignment.tokens[p];
    auto it = latent.find({t.sentence, t.index});
    if (it == latent.end()) {
      throw std::invalid_argument("no latent label for sentence " + std::to_string(t.sentence) +
                                  " token " + std::to_string(t.index));
    }
    if (assignment.hard[p] == kIrrelevant) {
      ++irrelevant;
      continue;
    }
    mined.push_back(assignment.class_names[assignment.hard[p]]);
    truth.push_back(it->second);
    ++per_class[assignment.hard[p]][it->second];
  }
  report.ari = mined.empty() ? 0.0 : adjusted_rand_index(mined, truth);
  for (const auto& counts : per_class) {
    std::size_t total = 0;
    std::size_t majority = 0;
    for (const auto& [label, c] : counts) {
      total += c;
      majority = std::max(majority, c);
    }
    report.ic.push_back(total ? static_cast<double>(majority) / static_cast<double>(total) : 0.0);
  }
  report.irrelevant_fraction =
      assignment.tokens.empty()
          ? 0.0
          : static_cast<double>(irrelevant) / static_cast<double>(assignment.tokens.size());
  return report;
}

}  // namespace muco
