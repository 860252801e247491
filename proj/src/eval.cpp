#include "ocsmm/eval.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace ocsmm {

namespace {

struct ClassCounts {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

ClassCounts validate(const ScoredLabels& data) {
  if (data.scores.size() != data.labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  ClassCounts c;
  for (Label l : data.labels) (l == Label::anomalous ? c.positives : c.negatives)++;
  return c;
}

std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Cumulative (false positive, true positive) counts after each tie block.
std::vector<std::pair<std::int64_t, std::int64_t>> roc_counts(const ScoredLabels& data) {
  const auto order = descending_order(data.scores);
  std::vector<std::pair<std::int64_t, std::int64_t>> steps{{0, 0}};
  std::int64_t fp = 0, tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (data.labels[order[k]] == Label::anomalous ? tp : fp)++;
    const bool block_ends =
        k + 1 == order.size() || data.scores[order[k + 1]] != data.scores[order[k]];
    if (block_ends) steps.emplace_back(fp, tp);
  }
  return steps;
}

}  // namespace

std::vector<RocPoint> roc_curve(const ScoredLabels& data) {
  const auto counts = validate(data);
  if (counts.positives == 0 || counts.negatives == 0)
    throw std::invalid_argument("roc_curve: both classes must be present");
  std::vector<RocPoint> curve;
  for (const auto& [fp, tp] : roc_counts(data))
    curve.push_back({static_cast<double>(fp) / static_cast<double>(counts.negatives),
                     static_cast<double>(tp) / static_cast<double>(counts.positives)});
  return curve;
}

double auc(const ScoredLabels& data) {
  const auto counts = validate(data);
  if (counts.positives == 0 || counts.negatives == 0)
    throw std::invalid_argument("auc: both classes must be present");
  // Twice the trapezoid area in count units: sum of dFP * (TP_prev + TP_next).
  const auto steps = roc_counts(data);
  std::int64_t twice_area = 0;
  for (std::size_t k = 1; k < steps.size(); ++k)
    twice_area += (steps[k].first - steps[k - 1].first) * (steps[k].second + steps[k - 1].second);
  return static_cast<double>(twice_area) /
         (2.0 * static_cast<double>(counts.positives) * static_cast<double>(counts.negatives));
}

double average_precision(const ScoredLabels& data) {
  const auto counts = validate(data);
  if (counts.positives == 0)
    throw std::invalid_argument("average_precision: no anomalous items");
  const auto order = descending_order(data.scores);
  double sum = 0;
  std::int64_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (data.labels[order[k]] != Label::anomalous) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(counts.positives);
}

}  // namespace ocsmm
