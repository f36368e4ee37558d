#pragma once

#include <filesystem>

#include "mret/image.hpp"

namespace mret {

/// Writes an 8-bit grayscale PNG. Pixels must lie in [0,1]; the stored byte is
/// round-half-up(p * 255). Identical images produce byte-identical files.
void save_png(const GrayImage& img, const std::filesystem::path& path);

/// Reads an 8-bit grayscale PNG written by save_png (or any unpaletted
/// grayscale-8 PNG); pixels come back as byte/255 floats.
GrayImage load_png(const std::filesystem::path& path);

}  // namespace mret
