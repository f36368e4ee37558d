#pragma once

#include <array>

#include "mret/tensor.hpp"

namespace mret {

/// Numerically stable two-class softmax (max subtraction).
std::array<double, 2> softmax2(const std::array<double, 2>& logits);

/// Weighted cross entropy with weighted-mean normalization:
///   per-sample loss = -w[y] * log softmax(logits)[y]
///   batch loss      = sum(per-sample) / sum(w[y])
/// The log argument is floored at 1e-12. When dlogits is non-null it receives
/// dLoss/dlogits for the batch. Labels must be 0 or 1, weights positive.
double weighted_ce(const Logits& logits, const std::vector<int>& labels,
                   const std::array<double, 2>& weights, Logits* dlogits = nullptr);

}  // namespace mret
