#include "shearo/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "shearo/core/error.hpp"

namespace shearo::eval {

namespace {

struct Counts {
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

Counts count_classes(const std::vector<ScoredSample>& samples) {
  Counts c;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw ValidationError("scores must be finite");
    (s.label ? c.positives : c.negatives) += 1;
  }
  return c;
}

/// Indices sorted by descending score, grouped so equal scores form one
/// threshold step.
std::vector<std::vector<std::size_t>> score_groups(const std::vector<ScoredSample>& samples) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score > samples[b].score;
  });
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (groups.empty() || samples[groups.back().back()].score != samples[order[k]].score)
      groups.emplace_back();
    groups.back().push_back(order[k]);
  }
  return groups;
}

}  // namespace

RocResult roc_auc(const std::vector<ScoredSample>& samples) {
  const Counts c = count_classes(samples);
  if (c.positives == 0 || c.negatives == 0)
    throw ValidationError("roc_auc requires both classes present");

  RocResult out;
  out.points.emplace_back(0.0, 0.0);
  std::int64_t tp = 0, fp = 0;
  double auc = 0.0;
  for (const auto& group : score_groups(samples)) {
    for (const std::size_t i : group) (samples[i].label ? tp : fp) += 1;
    const double fpr = static_cast<double>(fp) / static_cast<double>(c.negatives);
    const double tpr = static_cast<double>(tp) / static_cast<double>(c.positives);
    const auto& [prev_fpr, prev_tpr] = out.points.back();
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    out.points.emplace_back(fpr, tpr);
  }
  out.auc = auc;
  return out;
}

PrResult pr_ap(const std::vector<ScoredSample>& samples) {
  const Counts c = count_classes(samples);
  if (c.positives == 0) throw ValidationError("pr_ap requires at least one positive sample");

  PrResult out;
  std::int64_t tp = 0, fp = 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& group : score_groups(samples)) {
    for (const std::size_t i : group) (samples[i].label ? tp : fp) += 1;
    const double recall = static_cast<double>(tp) / static_cast<double>(c.positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    out.points.emplace_back(recall, precision);
  }
  out.ap = ap;
  return out;
}

double chance_ap(const std::vector<ScoredSample>& samples) {
  if (samples.empty()) throw ValidationError("chance_ap requires samples");
  std::int64_t positives = 0;
  for (const auto& s : samples) positives += s.label ? 1 : 0;
  return static_cast<double>(positives) / static_cast<double>(samples.size());
}

}  // namespace shearo::eval
