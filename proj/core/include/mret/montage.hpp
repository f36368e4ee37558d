#pragma once

#include <array>
#include <vector>

#include "mret/image.hpp"
#include "mret/volume.hpp"

namespace mret {

// Canonical geometry: 36 slices of 512x512 tiled on a 6x6 grid.
inline constexpr int kStackSlices = 36;
inline constexpr int kStackSide = 512;
inline constexpr int kMontageGrid = 6;
inline constexpr int kMontageSide = kMontageGrid * kStackSide;  // 3072
inline constexpr int kMontageOutSide = 512;

enum class PlanMode { Sampled, Padded };

/// Which source slices form the canonical 36-slice stack.
/// Indices are 1-based; 0 marks an all-zero padding slice.
struct SamplingPlan {
  int source_slices = 0;  // z
  int step = 0;           // N (0 in Padded mode)
  int first_slice = 0;    // m (0 in Padded mode)
  PlanMode mode = PlanMode::Sampled;
  std::array<int, kStackSlices> indices{};
};

/// The 512x512x36 stack plus the plan that produced it. Slice k lives at
/// data[k * 512 * 512 ...], y-major, x-fastest (same plane layout as Volume3D).
struct CanonicalStack {
  SamplingPlan plan;
  std::vector<float> data;

  CanonicalStack() : data(static_cast<std::size_t>(kStackSlices) * kStackSide * kStackSide, 0.0f) {}
  float* slice(int k) { return data.data() + static_cast<std::size_t>(k) * kStackSide * kStackSide; }
  const float* slice(int k) const {
    return data.data() + static_cast<std::size_t>(k) * kStackSide * kStackSide;
  }
  bool padded_slice(int k) const { return plan.indices[k] == 0; }
};

/// Intensity window in Hounsfield units, or Auto for the stack's own range.
struct WindowSpec {
  bool auto_range = false;
  float lo = -100.f;
  float hi = 300.f;

  static WindowSpec automatic() { return WindowSpec{true, 0.f, 0.f}; }
  static WindowSpec explicit_range(float lo, float hi);
};

/// For z >= 36: N = floor(z/36), m = floor(z/2) - 17N, indices m + N*i for
/// i in [0..35] (1-based). For z < 36: indices [1..z] then zero markers.
SamplingPlan plan_sampling(int z);

/// Selects the planned slices out of a 512x512xz volume; zero markers yield
/// all-zero slices. Throws DimensionMismatch if the volume is not 512x512 or
/// its z differs from the plan.
CanonicalStack extract_stack(const Volume3D& vol, const SamplingPlan& plan);

/// clamp((v - lo)/(hi - lo), 0, 1) per value. Auto takes (min, max) over
/// non-padded slices; a constant stack maps to 0. Padding slices are forced
/// back to exact zero afterwards.
CanonicalStack window_normalize(const CanonicalStack& stack, const WindowSpec& w);

/// The resolved window bounds Auto would use on this stack.
std::array<float, 2> resolve_window(const CanonicalStack& stack, const WindowSpec& w);

/// Tiles stack slice k (0-based) at tile row k/6, column k%6 of a 3072x3072
/// image.
GrayImage tile_montage(const CanonicalStack& stack);

/// Box (area) averaging; the source side must be an integer multiple of the
/// target side. Throws NonIntegerFactor.
GrayImage downsample_montage(const GrayImage& img, int target = kMontageOutSide);

struct MontageResult {
  GrayImage image;        // 512x512, values in [0,1]
  SamplingPlan plan;
  std::array<float, 2> window_used{};  // resolved lo, hi
};

/// Full reduction of a volume to its 512x512 montage:
/// resample_inplane -> plan_sampling -> extract_stack -> window_normalize ->
/// tile_montage -> downsample_montage. Deterministic; only the slices the plan
/// selects are resampled (observationally identical to resampling all of them).
MontageResult make_montage(const Volume3D& vol, const WindowSpec& w);

}  // namespace mret
