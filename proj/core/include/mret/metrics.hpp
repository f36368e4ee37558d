#pragma once

#include <span>
#include <vector>

namespace mret {

struct ConfusionMatrix {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long total() const { return tp + fp + fn + tn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
};

/// Tallies predictions (score >= threshold means positive) against labels.
/// Throws LengthMismatch, EmptyInput.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

struct Prf1 {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero; that metric reads 0
};

Prf1 prf1(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // predictions are positive at score >= threshold
};

/// Threshold sweep over the distinct scores, descending, tied scores grouped
/// into a single step; begins at exactly (0,0) and ends at exactly (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Throws SingleClass when either class is absent, LengthMismatch, EmptyInput.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under the curve. Equals the tie-aware Mann-Whitney
/// statistic (ties credited 0.5).
double auc(const RocCurve& curve);

double auc_score(std::span<const double> scores, std::span<const int> labels);

}  // namespace mret
