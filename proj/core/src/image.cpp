#include "mret/image.hpp"

#include <algorithm>
#include <cmath>

#include "mret/errors.hpp"

namespace mret {

void resize_bilinear_plane(const float* src, int src_w, int src_h,
                           float* dst, int dst_w, int dst_h) {
  const double sx_scale = static_cast<double>(src_w) / dst_w;
  const double sy_scale = static_cast<double>(src_h) / dst_h;
  for (int oy = 0; oy < dst_h; ++oy) {
    const double sy = (oy + 0.5) * sy_scale - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    int y1 = y0 + 1;
    y0 = std::clamp(y0, 0, src_h - 1);
    y1 = std::clamp(y1, 0, src_h - 1);
    const float* row0 = src + static_cast<std::size_t>(y0) * src_w;
    const float* row1 = src + static_cast<std::size_t>(y1) * src_w;
    float* out = dst + static_cast<std::size_t>(oy) * dst_w;
    for (int ox = 0; ox < dst_w; ++ox) {
      const double sx = (ox + 0.5) * sx_scale - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      int x1 = x0 + 1;
      x0 = std::clamp(x0, 0, src_w - 1);
      x1 = std::clamp(x1, 0, src_w - 1);
      const double top = (1.0 - fx) * row0[x0] + fx * row0[x1];
      const double bot = (1.0 - fx) * row1[x0] + fx * row1[x1];
      out[ox] = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (img.width == width && img.height == height) return img;
  GrayImage out(width, height);
  resize_bilinear_plane(img.pixels.data(), img.width, img.height,
                        out.pixels.data(), width, height);
  return out;
}

GrayImage box_downsample(const GrayImage& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1 || img.width % target_w != 0 || img.height % target_h != 0) {
    throw NonIntegerFactor("box_downsample: " + std::to_string(img.width) + "x" +
                           std::to_string(img.height) + " is not an integer multiple of " +
                           std::to_string(target_w) + "x" + std::to_string(target_h));
  }
  const int fx = img.width / target_w;
  const int fy = img.height / target_h;
  GrayImage out(target_w, target_h);
  const double inv_area = 1.0 / (static_cast<double>(fx) * fy);
  for (int oy = 0; oy < target_h; ++oy) {
    for (int ox = 0; ox < target_w; ++ox) {
      double sum = 0.0;
      for (int dy = 0; dy < fy; ++dy) {
        const float* row = img.pixels.data() + static_cast<std::size_t>(oy * fy + dy) * img.width;
        for (int dx = 0; dx < fx; ++dx) sum += row[ox * fx + dx];
      }
      out.at(oy, ox) = static_cast<float>(sum * inv_area);
    }
  }
  return out;
}

GrayImage resize_to_side(const GrayImage& img, int side) {
  if (side < 1) throw InvalidSize("resize_to_side: side must be >= 1");
  if (img.width == side && img.height == side) return img;
  if (img.width % side == 0 && img.height % side == 0) return box_downsample(img, side, side);
  return resize_bilinear(img, side, side);
}

}  // namespace mret
