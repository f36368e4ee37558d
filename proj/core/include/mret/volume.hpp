#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace mret {

/// Dense 3D scalar grid in Hounsfield-like units.
/// data is stored x-fastest: data[ix + x*(iy + y*iz)].
struct Volume3D {
  std::array<int, 3> dims{0, 0, 0};              // x, y, z
  std::array<float, 3> voxel_size{1.f, 1.f, 1.f};  // mm
  std::vector<float> data;

  int x() const { return dims[0]; }
  int y() const { return dims[1]; }
  int z() const { return dims[2]; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  float& at(int ix, int iy, int iz) {
    return data[ix + static_cast<std::size_t>(dims[0]) * (iy + static_cast<std::size_t>(dims[1]) * iz)];
  }
  float at(int ix, int iy, int iz) const {
    return data[ix + static_cast<std::size_t>(dims[0]) * (iy + static_cast<std::size_t>(dims[1]) * iz)];
  }
  /// Pointer to the start of axial slice iz (a y-major, x-fastest plane).
  const float* slice(int iz) const {
    return data.data() + static_cast<std::size_t>(dims[0]) * dims[1] * iz;
  }
  float* slice(int iz) {
    return data.data() + static_cast<std::size_t>(dims[0]) * dims[1] * iz;
  }
};

/// Parsed NIfTI-1 header fields this library cares about.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 0;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0.f;
  float scl_slope = 0.f;
  float scl_inter = 0.f;
  std::array<char, 4> magic{};
  bool byte_swapped = false;
};

/// Reads a NIfTI-1 single file (.nii, or gzip-compressed .nii.gz).
/// Voxel values are raw * scl_slope + scl_inter (slope 0 treated as 1);
/// non-finite samples are zeroed. Both endiannesses are accepted.
/// Throws BadMagic, UnsupportedDatatype, TruncatedFile, NonVolumetric, IoFailure.
Volume3D read_nifti(const std::filesystem::path& path);

/// Header-only variant of read_nifti, for inspection.
NiftiHeader read_nifti_header(const std::filesystem::path& path);

/// Writes a little-endian NIfTI-1 single file: float32 data, scl_slope=1,
/// scl_inter=0, vox_offset=352. Throws IoFailure.
void write_nifti(const Volume3D& vol, const std::filesystem::path& path);

/// Resamples every axial slice independently to target x target with bilinear
/// interpolation and edge clamping; z is unchanged and in-plane voxel sizes
/// are rescaled by x/target and y/target.
Volume3D resample_inplane(const Volume3D& vol, int target = 512);

}  // namespace mret
