#include "mret/montage.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mret/errors.hpp"

namespace mret {

WindowSpec WindowSpec::explicit_range(float lo, float hi) {
  if (!(lo < hi)) throw InvalidSize("window: lo must be < hi");
  return WindowSpec{false, lo, hi};
}

SamplingPlan plan_sampling(int z) {
  if (z < 1) throw InvalidSize("plan_sampling: z must be >= 1");
  SamplingPlan plan;
  plan.source_slices = z;
  if (z >= kStackSlices) {
    plan.mode = PlanMode::Sampled;
    plan.step = z / kStackSlices;
    plan.first_slice = z / 2 - 17 * plan.step;
    for (int i = 0; i < kStackSlices; ++i) {
      plan.indices[i] = plan.first_slice + plan.step * i;  // 1-based, stays in [1, z]
    }
  } else {
    plan.mode = PlanMode::Padded;
    plan.step = 0;
    plan.first_slice = 0;
    for (int i = 0; i < z; ++i) plan.indices[i] = i + 1;
    for (int i = z; i < kStackSlices; ++i) plan.indices[i] = 0;
  }
  return plan;
}

CanonicalStack extract_stack(const Volume3D& vol, const SamplingPlan& plan) {
  if (vol.x() != kStackSide || vol.y() != kStackSide) {
    throw DimensionMismatch("extract_stack: volume must be " + std::to_string(kStackSide) + "x" +
                            std::to_string(kStackSide) + " in-plane, got " +
                            std::to_string(vol.x()) + "x" + std::to_string(vol.y()));
  }
  if (vol.z() != plan.source_slices) {
    throw DimensionMismatch("extract_stack: plan is for z=" + std::to_string(plan.source_slices) +
                            " but volume has z=" + std::to_string(vol.z()));
  }
  constexpr std::size_t kPlane = static_cast<std::size_t>(kStackSide) * kStackSide;
  CanonicalStack stack;
  stack.plan = plan;
  for (int k = 0; k < kStackSlices; ++k) {
    const int idx = plan.indices[k];
    if (idx == 0) continue;  // padding slice stays zero
    std::copy_n(vol.slice(idx - 1), kPlane, stack.slice(k));
  }
  return stack;
}

std::array<float, 2> resolve_window(const CanonicalStack& stack, const WindowSpec& w) {
  if (!w.auto_range) return {w.lo, w.hi};
  float lo = std::numeric_limits<float>::max();
  float hi = std::numeric_limits<float>::lowest();
  constexpr std::size_t kPlane = static_cast<std::size_t>(kStackSide) * kStackSide;
  for (int k = 0; k < kStackSlices; ++k) {
    if (stack.padded_slice(k)) continue;
    const float* s = stack.slice(k);
    for (std::size_t i = 0; i < kPlane; ++i) {
      lo = std::min(lo, s[i]);
      hi = std::max(hi, s[i]);
    }
  }
  if (lo > hi) return {0.f, 1.f};  // all-padded stack
  return {lo, hi};
}

CanonicalStack window_normalize(const CanonicalStack& stack, const WindowSpec& w) {
  const auto [lo, hi] = resolve_window(stack, w);
  const double span = static_cast<double>(hi) - lo;
  constexpr std::size_t kPlane = static_cast<std::size_t>(kStackSide) * kStackSide;
  CanonicalStack out;
  out.plan = stack.plan;
  for (int k = 0; k < kStackSlices; ++k) {
    if (stack.padded_slice(k)) continue;  // padding stays exact zero
    const float* src = stack.slice(k);
    float* dst = out.slice(k);
    if (span <= 0.0) {
      std::fill_n(dst, kPlane, 0.0f);  // constant stack under Auto
      continue;
    }
    for (std::size_t i = 0; i < kPlane; ++i) {
      const double t = (static_cast<double>(src[i]) - lo) / span;
      dst[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
  }
  return out;
}

GrayImage tile_montage(const CanonicalStack& stack) {
  GrayImage img(kMontageSide, kMontageSide);
  for (int k = 0; k < kStackSlices; ++k) {
    const int tile_row = k / kMontageGrid;
    const int tile_col = k % kMontageGrid;
    const float* s = stack.slice(k);
    for (int iy = 0; iy < kStackSide; ++iy) {
      float* dst = img.pixels.data() +
                   static_cast<std::size_t>(tile_row * kStackSide + iy) * kMontageSide +
                   static_cast<std::size_t>(tile_col) * kStackSide;
      std::copy_n(s + static_cast<std::size_t>(iy) * kStackSide, kStackSide, dst);
    }
  }
  return img;
}

GrayImage downsample_montage(const GrayImage& img, int target) {
  return box_downsample(img, target, target);
}

MontageResult make_montage(const Volume3D& vol, const WindowSpec& w) {
  const SamplingPlan plan = plan_sampling(vol.z());

  // Resample only the selected slices; slice-wise identical to resampling the
  // whole volume first.
  constexpr std::size_t kPlane = static_cast<std::size_t>(kStackSide) * kStackSide;
  CanonicalStack stack;
  stack.plan = plan;
  const bool already_canonical = vol.x() == kStackSide && vol.y() == kStackSide;
  for (int k = 0; k < kStackSlices; ++k) {
    const int idx = plan.indices[k];
    if (idx == 0) continue;
    if (already_canonical) {
      std::copy_n(vol.slice(idx - 1), kPlane, stack.slice(k));
    } else {
      resize_bilinear_plane(vol.slice(idx - 1), vol.x(), vol.y(), stack.slice(k), kStackSide,
                            kStackSide);
    }
  }

  MontageResult result;
  result.plan = plan;
  result.window_used = resolve_window(stack, w);
  const CanonicalStack normalized = window_normalize(stack, w);
  result.image = downsample_montage(tile_montage(normalized), kMontageOutSide);
  return result;
}

}  // namespace mret
