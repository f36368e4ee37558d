#pragma once

#include <array>
#include <vector>

namespace mret {

/// Dense NCHW tensor of doubles; all training math runs at 64-bit precision.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t size() const { return v.size(); }
  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  double& at(int in, int ic, int ih, int iw) { return v[index(in, ic, ih, iw)]; }
  double at(int in, int ic, int ih, int iw) const { return v[index(in, ic, ih, iw)]; }

  /// Pointer to sample in's data (c*h*w contiguous doubles).
  double* sample(int in) { return v.data() + static_cast<std::size_t>(in) * c * h * w; }
  const double* sample(int in) const { return v.data() + static_cast<std::size_t>(in) * c * h * w; }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/// Per-sample class logits; the classifier always has two outputs.
using Logits = std::vector<std::array<double, 2>>;

}  // namespace mret
