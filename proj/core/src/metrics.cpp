#include "mret/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mret/errors.hpp"

namespace mret {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  if (scores.size() != labels.size()) {
    throw LengthMismatch("confusion: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw EmptyInput("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;  // boundary counts as positive
    if (labels[i] == 1) {
      (pred ? cm.tp : cm.fn)++;
    } else {
      (pred ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

Prf1 prf1(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw EmptyInput("prf1: empty confusion matrix");
  Prf1 r;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0) {
    r.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  } else {
    r.degenerate = true;
  }
  if (cm.tp + cm.fn > 0) {
    r.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  } else {
    r.degenerate = true;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.degenerate = true;
  }
  return r;
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw LengthMismatch("roc: score/label lengths differ");
  }
  if (scores.empty()) throw EmptyInput("roc: no samples");
  long long pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw SingleClass("roc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  long long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // tied scores form a single step
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double auc_score(std::span<const double> scores, std::span<const int> labels) {
  return auc(roc(scores, labels));
}

}  // namespace mret
