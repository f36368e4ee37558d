#pragma once

#include <vector>

namespace mret {

/// 2D grayscale image, row-major, pixels[col + width*row].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0f) {}

  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

/// Bilinear resampling of a row-major plane with pixel-center alignment and
/// edge clamping: source coordinate = (i + 0.5) * src/dst - 0.5.
void resize_bilinear_plane(const float* src, int src_w, int src_h,
                           float* dst, int dst_w, int dst_h);

GrayImage resize_bilinear(const GrayImage& img, int width, int height);

/// Exact box averaging; source sides must be integer multiples of the target.
GrayImage box_downsample(const GrayImage& img, int target_w, int target_h);

/// Resize to side x side: identity when already there, box averaging when the
/// ratio is an exact integer, bilinear otherwise.
GrayImage resize_to_side(const GrayImage& img, int side);

}  // namespace mret
