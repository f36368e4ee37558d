#include "mret/adam.hpp"

#include "mret/errors.hpp"

#include <cmath>
#include <string>

namespace mret {

AdamState AdamState::like(const ParamStore& params) {
  AdamState state;
  state.t = 0;
  state.m.reserve(params.arrays.size());
  state.v.reserve(params.arrays.size());
  for (const ParamArray& array : params.arrays) {
    state.m.emplace_back(array.v.size(), 0.0);
    state.v.emplace_back(array.v.size(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, const ParamStore& grads, ParamStore& params,
               const AdamConfig& cfg) {
  if (state.m.size() != params.arrays.size() || grads.arrays.size() != params.arrays.size()) {
    throw ShapeMismatch("optimizer state does not match the parameter layout");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t a = 0; a < params.arrays.size(); ++a) {
    std::vector<double>& theta = params.arrays[a].v;
    const std::vector<double>& g = grads.arrays[a].v;
    if (g.size() != theta.size()) {
      throw ShapeMismatch("gradient array '" + grads.arrays[a].name +
                          "' does not match its parameter array");
    }
    std::vector<double>& m = state.m[a];
    std::vector<double>& v = state.v[a];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace mret
