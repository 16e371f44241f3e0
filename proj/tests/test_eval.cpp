#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "shearo/core/rng.hpp"
#include "shearo/eval/detection.hpp"
#include "shearo/eval/metrics.hpp"

using namespace shearo;
using namespace shearo::eval;

namespace {

std::vector<ScoredSample> make_samples(const std::vector<double>& pos,
                                       const std::vector<double>& neg) {
  std::vector<ScoredSample> out;
  int n = 0;
  for (const double s : pos) out.push_back({"p" + std::to_string(n++), true, s});
  for (const double s : neg) out.push_back({"n" + std::to_string(n++), false, s});
  return out;
}

/// Mann-Whitney oracle: P(pos > neg) + 0.5 P(pos == neg) over all pairs.
double pairwise_auc(const std::vector<ScoredSample>& samples) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (const auto& a : samples) {
    if (!a.label) continue;
    for (const auto& b : samples) {
      if (b.label) continue;
      ++pairs;
      if (a.score > b.score)
        wins += 1.0;
      else if (a.score == b.score)
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

/// Brute-force AP oracle: walk descending score groups and accumulate step
/// integration directly from recounted confusion totals.
double brute_force_ap(std::vector<ScoredSample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.score > b.score; });
  std::int64_t positives = 0;
  for (const auto& s : samples) positives += s.label ? 1 : 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j].score == samples[i].score) ++j;
    // Recount everything above this threshold from scratch.
    std::int64_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < j; ++k) (samples[k].label ? tp : fp) += 1;
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace

TEST_CASE("roc_auc: separation, order, ties") {
  CHECK(roc_auc(make_samples({0.9, 0.8}, {0.2, 0.1})).auc == doctest::Approx(1.0));
  CHECK(roc_auc(make_samples({0.8, 0.4}, {0.6, 0.2})).auc == doctest::Approx(0.75));
  CHECK(roc_auc(make_samples({0.5, 0.5}, {0.5, 0.5})).auc == doctest::Approx(0.5));
  CHECK(roc_auc(make_samples({0.2}, {0.8})).auc == doctest::Approx(0.0));
  CHECK_THROWS_AS((void)roc_auc(make_samples({0.5}, {})), ValidationError);

  const auto roc = roc_auc(make_samples({0.9, 0.3}, {0.5, 0.5, 0.1}));
  for (std::size_t i = 1; i < roc.points.size(); ++i)
    CHECK(roc.points[i].first >= roc.points[i - 1].first);
}

TEST_CASE("roc_auc equals the pairwise oracle on randomized score sets") {
  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> pos, neg;
    const int np = 1 + static_cast<int>(rng.below(40));
    const int nn = 1 + static_cast<int>(rng.below(40));
    const bool quantized = trial % 3 == 0;  // force ties in a third of trials
    for (int i = 0; i < np; ++i)
      pos.push_back(quantized ? std::floor(rng.uniform(0, 8)) / 8.0 : rng.uniform(0, 1));
    for (int i = 0; i < nn; ++i)
      neg.push_back(quantized ? std::floor(rng.uniform(0, 8)) / 8.0 : rng.uniform(0, 1));
    const auto samples = make_samples(pos, neg);
    CHECK(std::abs(roc_auc(samples).auc - pairwise_auc(samples)) < 1e-12);
  }
}

TEST_CASE("pr_ap: manual step sums and the brute-force oracle") {
  CHECK(pr_ap(make_samples({0.9, 0.8}, {0.2, 0.1})).ap == doctest::Approx(1.0));
  // pos(0.9), neg(0.8), pos(0.7): AP = 0.5*1 + 0.5*(2/3).
  CHECK(pr_ap(make_samples({0.9, 0.7}, {0.8})).ap == doctest::Approx(5.0 / 6.0));
  CHECK_THROWS_AS((void)pr_ap(make_samples({}, {0.1})), ValidationError);

  Rng rng(102);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> pos, neg;
    const int np = 1 + static_cast<int>(rng.below(30));
    const int nn = static_cast<int>(rng.below(30));
    const bool quantized = trial % 3 == 0;
    for (int i = 0; i < np; ++i)
      pos.push_back(quantized ? std::floor(rng.uniform(0, 6)) / 6.0 : rng.uniform(0, 1));
    for (int i = 0; i < nn; ++i)
      neg.push_back(quantized ? std::floor(rng.uniform(0, 6)) / 6.0 : rng.uniform(0, 1));
    const auto samples = make_samples(pos, neg);
    CHECK(pr_ap(samples).ap == doctest::Approx(brute_force_ap(samples)).epsilon(1e-12));
  }
}

TEST_CASE("random scores give AP near prevalence (Monte Carlo)") {
  // Random-ranking AP carries a small positive finite-sample bias, so the
  // population must be large enough for mean AP to approach prevalence.
  Rng rng(103);
  const double prevalence = 0.3;
  const int n = 500;
  const int positives = static_cast<int>(prevalence * n);
  double mean_ap = 0.0;
  const int trials = 120;
  for (int t = 0; t < trials; ++t) {
    std::vector<ScoredSample> samples;
    for (int i = 0; i < n; ++i)
      samples.push_back({"s" + std::to_string(i), i < positives, rng.uniform(0, 1)});
    mean_ap += pr_ap(samples).ap;
  }
  mean_ap /= trials;
  CHECK(std::abs(mean_ap - prevalence) < 0.02);
}

TEST_CASE("chance_ap is prevalence") {
  CHECK(chance_ap(make_samples({0.5}, {0.5})) == doctest::Approx(0.5));
  CHECK(chance_ap(make_samples({0.1, 0.2, 0.3}, {})) == doctest::Approx(1.0));
  CHECK(chance_ap(make_samples({0.9}, {0.1, 0.2, 0.3})) == doctest::Approx(0.25));
}

TEST_CASE("label permutation never changes the metrics") {
  Rng rng(104);
  std::vector<ScoredSample> samples;
  for (int i = 0; i < 50; ++i)
    samples.push_back({"s" + std::to_string(i), rng.uniform() < 0.4, std::floor(rng.uniform(0, 10)) / 10.0});
  samples[0].label = true;
  samples[1].label = false;
  const double auc = roc_auc(samples).auc;
  const double ap = pr_ap(samples).ap;
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(samples);
    CHECK(roc_auc(samples).auc == doctest::Approx(auc).epsilon(1e-12));
    CHECK(pr_ap(samples).ap == doctest::Approx(ap).epsilon(1e-12));
  }
}

// --- detection ------------------------------------------------------------

namespace {

/// Pixel-counting IoU oracle for integer boxes: a box covers unit cells
/// [x_min, x_max) x [y_min, y_max).
double pixel_iou(const BoundingBox& a, const BoundingBox& b, std::int64_t grid) {
  std::int64_t inter = 0, uni = 0;
  for (std::int64_t y = 0; y < grid; ++y) {
    for (std::int64_t x = 0; x < grid; ++x) {
      const bool in_a = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool in_b = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox random_int_box(Rng& rng, std::int64_t grid) {
  const auto x0 = static_cast<double>(rng.below(static_cast<std::uint64_t>(grid - 1)));
  const auto y0 = static_cast<double>(rng.below(static_cast<std::uint64_t>(grid - 1)));
  const auto w = 1.0 + static_cast<double>(rng.below(static_cast<std::uint64_t>(grid) - static_cast<std::uint64_t>(x0) - 1));
  const auto h = 1.0 + static_cast<double>(rng.below(static_cast<std::uint64_t>(grid) - static_cast<std::uint64_t>(y0) - 1));
  return {x0, y0, x0 + w, y0 + h};
}

}  // namespace

TEST_CASE("iou: identities and the exhaustive pixel-count oracle") {
  const BoundingBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, {3, 3, 5, 5}) == 0.0);
  CHECK(iou(a, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));

  Rng rng(105);
  for (int t = 0; t < 200; ++t) {
    const BoundingBox p = random_int_box(rng, 64);
    const BoundingBox q = random_int_box(rng, 64);
    CHECK(iou(p, q) == doctest::Approx(pixel_iou(p, q, 64)).epsilon(1e-6));
    CHECK(iou(p, q) == doctest::Approx(iou(q, p)).epsilon(1e-12));
    CHECK(iou(p, q) >= 0.0);
    CHECK(iou(p, q) <= 1.0);
  }
}

TEST_CASE("greedy matching follows confidence order and the IoU threshold") {
  const std::vector<BoundingBox> gts = {{10, 10, 20, 20}};

  SUBCASE("exact hit") {
    const std::vector<ScoredBox> preds = {{{10, 10, 20, 20}, 0.9}};
    const auto m = match_detections(preds, gts, 0.5);
    CHECK(m.true_positive == std::vector<bool>{true});
    CHECK(m.unmatched_ground_truth == 0);
  }

  SUBCASE("higher confidence wins the shared ground truth") {
    const std::vector<ScoredBox> preds = {{{10, 10, 20, 20}, 0.7},   // IoU 1.0, lower conf
                                          {{11, 11, 20, 20}, 0.9}};  // IoU ~0.81, higher conf
    const auto m = match_detections(preds, gts, 0.5);
    CHECK(m.true_positive[1] == true);
    CHECK(m.true_positive[0] == false);
  }

  SUBCASE("IoU below threshold is a false positive") {
    const std::vector<ScoredBox> preds = {{{14, 14, 24, 24}, 0.9}};  // IoU ~0.22
    const auto m = match_detections(preds, gts, 0.5);
    CHECK(m.true_positive == std::vector<bool>{false});
    CHECK(m.unmatched_ground_truth == 1);
  }
}

TEST_CASE("map_suite: perfect detector scores 1.0 everywhere") {
  std::vector<std::vector<ScoredBox>> preds;
  std::vector<std::vector<BoundingBox>> gts;
  Rng rng(106);
  for (int i = 0; i < 6; ++i) {
    const BoundingBox b = random_int_box(rng, 48);
    gts.push_back({b});
    preds.push_back({{b, 1.0}});
  }
  const auto m = map_suite(preds, gts);
  CHECK(m.map == doctest::Approx(1.0));
  CHECK(m.map50 == doctest::Approx(1.0));
  CHECK(m.map75 == doctest::Approx(1.0));
  CHECK(m.mar1 == doctest::Approx(1.0));
  CHECK(m.mar10 == doctest::Approx(1.0));
  CHECK(m.mean_iou == doctest::Approx(1.0));
}

TEST_CASE("mar1 threshold enumeration: single pred at IoU 0.6") {
  // Passes thresholds 0.50, 0.55, 0.60 out of ten -> 3/10.
  const BoundingBox gt{0, 0, 10, 10};
  const BoundingBox pred{0, 0, 10, 6};  // IoU = 60/100
  REQUIRE(iou(gt, pred) == doctest::Approx(0.6));
  const auto m = map_suite({{{pred, 0.8}}}, {{gt}});
  CHECK(m.mar1 == doctest::Approx(0.3));
  CHECK(m.mar10 == doctest::Approx(0.3));
  CHECK(m.mean_iou == doctest::Approx(0.6));
}

TEST_CASE("mar10 dominates mar1 and both stay in [0,1]") {
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<ScoredBox>> preds;
    std::vector<std::vector<BoundingBox>> gts;
    for (int img = 0; img < 4; ++img) {
      std::vector<BoundingBox> g;
      std::vector<ScoredBox> p;
      const int ng = 1 + static_cast<int>(rng.below(3));
      for (int k = 0; k < ng; ++k) g.push_back(random_int_box(rng, 48));
      const int np = static_cast<int>(rng.below(6));
      for (int k = 0; k < np; ++k) p.push_back({random_int_box(rng, 48), rng.uniform(0, 1)});
      gts.push_back(g);
      preds.push_back(p);
    }
    const auto m = map_suite(preds, gts);
    CHECK(m.mar10 >= m.mar1 - 1e-12);
    for (const double v : {m.map, m.map50, m.map75, m.mar1, m.mar10, m.mean_iou}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("single-class identity: suite mAP equals per-threshold AP") {
  Rng rng(108);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<ScoredBox>> preds;
    std::vector<std::vector<BoundingBox>> gts;
    for (int img = 0; img < 5; ++img) {
      std::vector<BoundingBox> g;
      std::vector<ScoredBox> p;
      const int ng = 1 + static_cast<int>(rng.below(2));
      for (int k = 0; k < ng; ++k) {
        const BoundingBox b = random_int_box(rng, 64);
        g.push_back(b);
        if (rng.uniform() < 0.8) {
          // Jittered prediction near the truth.
          const double dx = std::floor(rng.uniform(0, 3));
          p.push_back({{b.x_min + dx, b.y_min, b.x_max + dx, b.y_max}, rng.uniform(0.2, 1.0)});
        }
      }
      if (rng.uniform() < 0.5) p.push_back({random_int_box(rng, 64), rng.uniform(0, 0.5)});
      gts.push_back(g);
      preds.push_back(p);
    }
    const auto m = map_suite(preds, gts);
    double mean_ap = 0.0;
    for (const double t : coco_iou_thresholds()) mean_ap += detection_ap(preds, gts, t);
    mean_ap /= static_cast<double>(coco_iou_thresholds().size());
    CHECK(m.map == doctest::Approx(mean_ap).epsilon(1e-9));
  }
}
