#include "mret/loss.hpp"

#include "mret/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mret {

namespace {
// Probabilities below this are clamped before the log so a saturated softmax
// cannot produce an infinite loss.
constexpr double kLogFloor = 1e-12;
}  // namespace

std::array<double, 2> softmax2(const std::array<double, 2>& logits) {
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double z = e0 + e1;
  return {e0 / z, e1 / z};
}

double weighted_ce(const Logits& logits, const std::vector<int>& labels,
                   const std::array<double, 2>& weights, Logits* dlogits) {
  if (logits.size() != labels.size()) {
    throw LengthMismatch("got " + std::to_string(logits.size()) + " logit rows for " +
                         std::to_string(labels.size()) + " labels");
  }
  if (logits.empty()) throw EmptyInput("loss over an empty batch");
  if (weights[0] <= 0.0 || weights[1] <= 0.0) {
    throw InvalidSize("class weights must be positive");
  }
  if (dlogits != nullptr) dlogits->assign(logits.size(), {0.0, 0.0});

  double loss_sum = 0.0;
  double weight_sum = 0.0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const int y = labels[s];
    if (y != 0 && y != 1) {
      throw InvalidSize("label must be 0 or 1, got " + std::to_string(y));
    }
    const double w = weights[static_cast<std::size_t>(y)];
    const std::array<double, 2> p = softmax2(logits[s]);
    loss_sum += w * -std::log(std::max(p[static_cast<std::size_t>(y)], kLogFloor));
    weight_sum += w;
    if (dlogits != nullptr) {
      // filled with w * (p - onehot) here; normalized by the weight sum below
      (*dlogits)[s][0] = w * (p[0] - (y == 0 ? 1.0 : 0.0));
      (*dlogits)[s][1] = w * (p[1] - (y == 1 ? 1.0 : 0.0));
    }
  }
  if (dlogits != nullptr) {
    for (auto& g : *dlogits) {
      g[0] /= weight_sum;
      g[1] /= weight_sum;
    }
  }
  return loss_sum / weight_sum;
}

}  // namespace mret
