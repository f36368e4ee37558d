#pragma once

#include <cstdint>
#include <vector>

#include "mret/net.hpp"

namespace mret {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators mirroring a ParamStore, plus the shared
/// step counter.
struct AdamState {
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState like(const ParamStore& params);
};

/// One bias-corrected Adam update; increments t and updates params in place.
void adam_step(AdamState& state, const ParamStore& grads, ParamStore& params,
               const AdamConfig& cfg);

}  // namespace mret
