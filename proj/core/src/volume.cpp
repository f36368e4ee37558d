#include "mret/volume.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mret/errors.hpp"
#include "mret/image.hpp"
#include "mret/version.hpp"

namespace mret {
namespace {

// NIfTI-1 field offsets within the 348-byte header.
constexpr std::size_t kHdrSize = 348;
constexpr std::size_t kOffDim = 40;        // short dim[8]
constexpr std::size_t kOffDatatype = 70;   // short
constexpr std::size_t kOffBitpix = 72;     // short
constexpr std::size_t kOffPixdim = 76;     // float pixdim[8]
constexpr std::size_t kOffVoxOffset = 108; // float
constexpr std::size_t kOffSclSlope = 112;  // float
constexpr std::size_t kOffSclInter = 116;  // float
constexpr std::size_t kOffXyztUnits = 123; // char
constexpr std::size_t kOffDescrip = 148;   // char[80]
constexpr std::size_t kOffMagic = 344;     // char[4]

// datatype codes
constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

std::uint16_t load_u16(const unsigned char* p, bool swap) {
  std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  return swap ? static_cast<std::uint16_t>((v >> 8) | (v << 8)) : v;
}

std::uint32_t load_u32(const unsigned char* p, bool swap) {
  std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  if (swap) v = __builtin_bswap32(v);
  return v;
}

std::uint64_t load_u64(const unsigned char* p, bool swap) {
  std::uint64_t lo = load_u32(p, false);
  std::uint64_t hi = load_u32(p + 4, false);
  std::uint64_t v = lo | (hi << 32);
  if (swap) v = __builtin_bswap64(v);
  return v;
}

float load_f32(const unsigned char* p, bool swap) {
  return std::bit_cast<float>(load_u32(p, swap));
}

double load_f64(const unsigned char* p, bool swap) {
  return std::bit_cast<double>(load_u64(p, swap));
}

void store_u16(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>(v >> 8);
}

void store_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

void store_f32(unsigned char* p, float v) { store_u32(p, std::bit_cast<std::uint32_t>(v)); }

/// Reads the whole file through zlib so plain .nii and .nii.gz look the same.
std::vector<unsigned char> read_all_bytes(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoFailure("cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) {
    bytes.insert(bytes.end(), buf, buf + n);
  }
  const bool read_error = n < 0;
  gzclose(f);
  if (read_error) throw IoFailure("read failed on " + path.string());
  return bytes;
}

NiftiHeader parse_header(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < kHdrSize) {
    throw BadMagic(path.string() + ": too short for a NIfTI-1 header");
  }
  const unsigned char* p = bytes.data();
  NiftiHeader h;
  // endianness is detected from the sizeof_hdr byte pattern
  if (load_u32(p, false) == kHdrSize) {
    h.byte_swapped = false;
  } else if (load_u32(p, true) == kHdrSize) {
    h.byte_swapped = true;
  } else {
    throw BadMagic(path.string() + ": sizeof_hdr is not 348 in either byte order");
  }
  const bool sw = h.byte_swapped;
  h.sizeof_hdr = static_cast<std::int32_t>(kHdrSize);
  for (int i = 0; i < 8; ++i) {
    h.dim[i] = static_cast<std::int16_t>(load_u16(p + kOffDim + 2 * i, sw));
    h.pixdim[i] = load_f32(p + kOffPixdim + 4 * i, sw);
  }
  h.datatype = static_cast<std::int16_t>(load_u16(p + kOffDatatype, sw));
  h.bitpix = static_cast<std::int16_t>(load_u16(p + kOffBitpix, sw));
  h.vox_offset = load_f32(p + kOffVoxOffset, sw);
  h.scl_slope = load_f32(p + kOffSclSlope, sw);
  h.scl_inter = load_f32(p + kOffSclInter, sw);
  std::memcpy(h.magic.data(), p + kOffMagic, 4);
  if (!(h.magic[0] == 'n' && h.magic[1] == '+' && h.magic[2] == '1' && h.magic[3] == '\0')) {
    throw BadMagic(path.string() + ": magic is not \"n+1\" (single-file NIfTI-1)");
  }
  return h;
}

int element_size(std::int16_t datatype) {
  switch (datatype) {
    case kDtUint8: return 1;
    case kDtInt16: return 2;
    case kDtInt32: return 4;
    case kDtFloat32: return 4;
    case kDtFloat64: return 8;
    default: return 0;
  }
}

}  // namespace

NiftiHeader read_nifti_header(const std::filesystem::path& path) {
  return parse_header(read_all_bytes(path), path);
}

Volume3D read_nifti(const std::filesystem::path& path) {
  const auto bytes = read_all_bytes(path);
  const NiftiHeader h = parse_header(bytes, path);

  if (h.dim[0] != 3 && h.dim[0] != 4) {
    throw NonVolumetric(path.string() + ": dim[0] = " + std::to_string(h.dim[0]));
  }
  if (h.dim[0] == 4 && h.dim[4] != 1) {
    throw NonVolumetric(path.string() + ": 4th dimension is " + std::to_string(h.dim[4]));
  }
  const int x = h.dim[1], y = h.dim[2], z = h.dim[3];
  if (x < 1 || y < 1 || z < 1) {
    throw NonVolumetric(path.string() + ": non-positive dimensions");
  }

  const int elsize = element_size(h.datatype);
  if (elsize == 0) {
    throw UnsupportedDatatype(path.string() + ": datatype code " + std::to_string(h.datatype));
  }

  const std::size_t count = static_cast<std::size_t>(x) * y * z;
  std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  if (h.vox_offset < 0 || offset < kHdrSize) offset = kHdrSize + 4;
  if (bytes.size() < offset || bytes.size() - offset < count * elsize) {
    throw TruncatedFile(path.string() + ": data section shorter than " +
                        std::to_string(count * elsize) + " bytes");
  }

  const float slope = (h.scl_slope == 0.0f) ? 1.0f : h.scl_slope;  // NIfTI-1 convention
  const float inter = h.scl_inter;
  const bool sw = h.byte_swapped;
  const unsigned char* src = bytes.data() + offset;

  Volume3D vol;
  vol.dims = {x, y, z};
  for (int i = 0; i < 3; ++i) {
    const float pd = std::fabs(h.pixdim[i + 1]);
    vol.voxel_size[i] = pd > 0.0f ? pd : 1.0f;
  }
  vol.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double raw;
    switch (h.datatype) {
      case kDtUint8: raw = src[i]; break;
      case kDtInt16: raw = static_cast<std::int16_t>(load_u16(src + 2 * i, sw)); break;
      case kDtInt32: raw = static_cast<std::int32_t>(load_u32(src + 4 * i, sw)); break;
      case kDtFloat32: raw = load_f32(src + 4 * i, sw); break;
      default: raw = load_f64(src + 8 * i, sw); break;
    }
    float v = static_cast<float>(raw * slope + inter);
    if (!std::isfinite(v)) v = 0.0f;  // invariant: finite after read
    vol.data[i] = v;
  }
  return vol;
}

void write_nifti(const Volume3D& vol, const std::filesystem::path& path) {
  const int x = vol.x(), y = vol.y(), z = vol.z();
  if (x < 1 || y < 1 || z < 1 || vol.data.size() != vol.voxel_count()) {
    throw InvalidSize("write_nifti: volume violates its invariants");
  }

  std::vector<unsigned char> hdr(kHdrSize + 4, 0);  // header + empty extension flag
  unsigned char* p = hdr.data();
  store_u32(p, kHdrSize);
  store_u16(p + kOffDim, 3);
  store_u16(p + kOffDim + 2, static_cast<std::uint16_t>(x));
  store_u16(p + kOffDim + 4, static_cast<std::uint16_t>(y));
  store_u16(p + kOffDim + 6, static_cast<std::uint16_t>(z));
  for (int i = 4; i < 8; ++i) store_u16(p + kOffDim + 2 * i, 1);
  store_u16(p + kOffDatatype, kDtFloat32);
  store_u16(p + kOffBitpix, 32);
  store_f32(p + kOffPixdim, 1.0f);  // qfac
  for (int i = 0; i < 3; ++i) store_f32(p + kOffPixdim + 4 * (i + 1), vol.voxel_size[i]);
  store_f32(p + kOffVoxOffset, 352.0f);
  store_f32(p + kOffSclSlope, 1.0f);
  store_f32(p + kOffSclInter, 0.0f);
  p[kOffXyztUnits] = 2;  // millimetres
  std::snprintf(reinterpret_cast<char*>(p + kOffDescrip), 80, "mret %s", version());
  p[kOffMagic] = 'n';
  p[kOffMagic + 1] = '+';
  p[kOffMagic + 2] = '1';
  p[kOffMagic + 3] = '\0';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(hdr.data()), static_cast<std::streamsize>(hdr.size()));

  std::vector<unsigned char> buf(vol.data.size() * 4);
  for (std::size_t i = 0; i < vol.data.size(); ++i) store_f32(buf.data() + 4 * i, vol.data[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoFailure("write failed on " + path.string());
}

Volume3D resample_inplane(const Volume3D& vol, int target) {
  if (target < 1) throw InvalidSize("resample_inplane: target must be >= 1");
  const int x = vol.x(), y = vol.y(), z = vol.z();
  if (x == target && y == target) return vol;

  Volume3D out;
  out.dims = {target, target, z};
  out.voxel_size = {vol.voxel_size[0] * static_cast<float>(x) / target,
                    vol.voxel_size[1] * static_cast<float>(y) / target,
                    vol.voxel_size[2]};
  out.data.resize(out.voxel_count());
  for (int iz = 0; iz < z; ++iz) {
    resize_bilinear_plane(vol.slice(iz), x, y, out.slice(iz), target, target);
  }
  return out;
}

}  // namespace mret
