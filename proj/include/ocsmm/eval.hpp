#pragma once

#include <vector>

#include "ocsmm/types.hpp"

namespace ocsmm {

/// Anomaly scores (higher = more anomalous) paired with ground truth.
struct ScoredLabels {
  std::vector<double> scores;
  std::vector<Label> labels;
};

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

/// ROC curve from (0,0) to (1,1). Thresholds sweep the distinct scores in
/// descending order; tied scores form a single step.
std::vector<RocPoint> roc_curve(const ScoredLabels& data);

/// Area under the ROC curve. Computed from integer counts, so it equals the
/// Mann-Whitney statistic (ties counted one half) bit for bit.
double auc(const ScoredLabels& data);

/// Mean of precision@rank over the ranks of anomalous items. Items are
/// ordered by descending score, ties kept in input order.
double average_precision(const ScoredLabels& data);

}  // namespace ocsmm
