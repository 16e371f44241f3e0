#pragma once

#include <string>
#include <utility>
#include <vector>

namespace shearo::eval {

struct ScoredSample {
  std::string id;
  bool label = false;  // true = defective (positive class)
  double score = 0.0;
};

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), monotone in fpr
  double auc = 0.0;
};

/// ROC over all score thresholds with equal scores grouped into one step;
/// AUC by trapezoidal integration. Requires both classes present.
RocResult roc_auc(const std::vector<ScoredSample>& samples);

struct PrResult {
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  double ap = 0.0;
};

/// Precision-recall over descending scores (ties grouped); AP by step
/// integration sum (R_i - R_{i-1}) * P_i. Requires at least one positive.
PrResult pr_ap(const std::vector<ScoredSample>& samples);

/// Random-classifier AP baseline: positive prevalence.
double chance_ap(const std::vector<ScoredSample>& samples);

}  // namespace shearo::eval
