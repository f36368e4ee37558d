#include "mret/volume.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "mret/errors.hpp"

using namespace mret;
namespace fs = std::filesystem;

namespace {

// Hand-assembled NIfTI-1 files, built byte-by-byte without touching the
// library's writer so reads are checked against an independent construction.
struct FileSpec {
  std::array<std::int16_t, 3> dims{2, 2, 2};
  std::int16_t dim0 = 3;                 // rank field
  std::int16_t dim4 = 1;                 // volumes when rank is 4
  std::int16_t datatype = 16;            // float32 by default
  std::int16_t bitpix = 32;
  std::array<float, 3> pixdim{1.f, 1.f, 1.f};
  float vox_offset = 352.f;
  float scl_slope = 1.f;
  float scl_inter = 0.f;
  std::string magic = std::string("n+1\0", 4);
  bool big_endian = false;
};

void put_bytes(std::vector<unsigned char>& out, std::size_t at, const void* src,
               std::size_t n, bool swap) {
  const unsigned char* bytes = static_cast<const unsigned char*>(src);
  for (std::size_t i = 0; i < n; ++i) {
    out[at + i] = swap ? bytes[n - 1 - i] : bytes[i];
  }
}

void put_i16(std::vector<unsigned char>& out, std::size_t at, std::int16_t v, bool swap) {
  put_bytes(out, at, &v, 2, swap);
}

void put_i32(std::vector<unsigned char>& out, std::size_t at, std::int32_t v, bool swap) {
  put_bytes(out, at, &v, 4, swap);
}

void put_f32(std::vector<unsigned char>& out, std::size_t at, float v, bool swap) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  put_bytes(out, at, &bits, 4, swap);
}

std::vector<unsigned char> craft_bytes(const FileSpec& spec,
                                       const std::vector<unsigned char>& payload) {
  const std::size_t data_at = static_cast<std::size_t>(spec.vox_offset);
  std::vector<unsigned char> out(std::max<std::size_t>(data_at, 352), 0);
  const bool swap = spec.big_endian;
  put_i32(out, 0, 348, swap);
  put_i16(out, 40, spec.dim0, swap);
  put_i16(out, 42, spec.dims[0], swap);
  put_i16(out, 44, spec.dims[1], swap);
  put_i16(out, 46, spec.dims[2], swap);
  put_i16(out, 48, spec.dim4, swap);
  put_i16(out, 50, 1, swap);
  put_i16(out, 52, 1, swap);
  put_i16(out, 54, 1, swap);
  put_i16(out, 70, spec.datatype, swap);
  put_i16(out, 72, spec.bitpix, swap);
  put_f32(out, 76, 1.f, swap);
  put_f32(out, 80, spec.pixdim[0], swap);
  put_f32(out, 84, spec.pixdim[1], swap);
  put_f32(out, 88, spec.pixdim[2], swap);
  put_f32(out, 108, spec.vox_offset, swap);
  put_f32(out, 112, spec.scl_slope, swap);
  put_f32(out, 116, spec.scl_inter, swap);
  std::memcpy(out.data() + 344, spec.magic.data(), 4);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

/// Payload from per-voxel raw values, encoded at the element width (values
/// must be representable in the target type).
std::vector<unsigned char> encode_payload(const std::vector<double>& raw,
                                          std::int16_t datatype, bool big_endian) {
  std::vector<unsigned char> out;
  auto append = [&](const void* src, std::size_t n) {
    const std::size_t at = out.size();
    out.resize(at + n);
    put_bytes(out, at, src, n, big_endian);
  };
  for (double v : raw) {
    switch (datatype) {
      case 2: {
        const unsigned char b = static_cast<unsigned char>(v);
        append(&b, 1);
        break;
      }
      case 4: {
        const std::int16_t b = static_cast<std::int16_t>(v);
        append(&b, 2);
        break;
      }
      case 8: {
        const std::int32_t b = static_cast<std::int32_t>(v);
        append(&b, 4);
        break;
      }
      case 16: {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        append(&bits, 4);
        break;
      }
      case 64: {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        append(&bits, 8);
        break;
      }
      default:
        REQUIRE(false);
    }
  }
  return out;
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mret_volume_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::vector<unsigned char>& bytes) {
  const fs::path path = temp_file(name);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  REQUIRE(file.good());
  return path;
}

}  // namespace

TEST_CASE("every supported datatype reads back the encoded values") {
  const std::vector<double> raw{0, 1, 17, 42, 100, 3, 250, 7};
  struct Case {
    std::int16_t datatype;
    std::int16_t bitpix;
    const char* name;
  };
  const Case cases[] = {
      {2, 8, "u8"}, {4, 16, "i16"}, {8, 32, "i32"}, {16, 32, "f32"}, {64, 64, "f64"}};
  for (const Case& c : cases) {
    CAPTURE(c.name);
    FileSpec spec;
    spec.datatype = c.datatype;
    spec.bitpix = c.bitpix;
    const auto path = write_file(std::string("dtype_") + c.name + ".nii",
                                 craft_bytes(spec, encode_payload(raw, c.datatype, false)));
    const Volume3D vol = read_nifti(path);
    REQUIRE(vol.dims == std::array<int, 3>{2, 2, 2});
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(vol.data[i] == static_cast<float>(raw[i]));
    }
  }
}

TEST_CASE("scaling applies raw * slope + inter, and slope 0 means slope 1") {
  const std::vector<double> raw{-4, 0, 10, 100, 7, -1, 3, 2};
  FileSpec spec;
  spec.datatype = 4;
  spec.bitpix = 16;

  SUBCASE("explicit slope and intercept") {
    spec.scl_slope = 0.5f;
    spec.scl_inter = 10.f;
    const auto path =
        write_file("scaled.nii", craft_bytes(spec, encode_payload(raw, 4, false)));
    const Volume3D vol = read_nifti(path);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(vol.data[i] == doctest::Approx(raw[i] * 0.5 + 10.0));
    }
  }
  SUBCASE("zero slope leaves values unscaled") {
    spec.scl_slope = 0.f;
    spec.scl_inter = 0.f;
    const auto path =
        write_file("slope0.nii", craft_bytes(spec, encode_payload(raw, 4, false)));
    const Volume3D vol = read_nifti(path);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(vol.data[i] == static_cast<float>(raw[i]));
    }
  }
}

TEST_CASE("big-endian files decode to the same volume") {
  const std::vector<double> raw{-300, -2, 7, 1000, 12, 0, -77, 6};
  FileSpec le;
  le.datatype = 4;
  le.bitpix = 16;
  FileSpec be = le;
  be.big_endian = true;
  const auto le_path = write_file("end_le.nii", craft_bytes(le, encode_payload(raw, 4, false)));
  const auto be_path = write_file("end_be.nii", craft_bytes(be, encode_payload(raw, 4, true)));
  const Volume3D a = read_nifti(le_path);
  const Volume3D b = read_nifti(be_path);
  CHECK(a.dims == b.dims);
  CHECK(a.data == b.data);
  CHECK(read_nifti_header(be_path).byte_swapped);
  CHECK_FALSE(read_nifti_header(le_path).byte_swapped);
}

TEST_CASE("gzip-compressed files read transparently") {
  const std::vector<double> raw{1, 2, 3, 4, 5, 6, 7, 8};
  FileSpec spec;
  const auto bytes = craft_bytes(spec, encode_payload(raw, 16, false));
  const fs::path path = temp_file("compressed.nii.gz");
  gzFile gz = gzopen(path.string().c_str(), "wb");
  REQUIRE(gz != nullptr);
  REQUIRE(gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size())) ==
          static_cast<int>(bytes.size()));
  gzclose(gz);
  const Volume3D vol = read_nifti(path);
  REQUIRE(vol.voxel_count() == 8);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(vol.data[i] == static_cast<float>(raw[i]));
  }
}

TEST_CASE("header quirks are tolerated") {
  const std::vector<double> raw{9, 8, 7, 6, 5, 4, 3, 2};

  SUBCASE("vox_offset below the header size falls back to 352") {
    FileSpec spec;
    spec.vox_offset = 0.f;
    auto bytes = craft_bytes(spec, {});
    bytes.resize(352, 0);
    const auto payload = encode_payload(raw, 16, false);
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    const Volume3D vol = read_nifti(write_file("offset0.nii", bytes));
    CHECK(vol.data[0] == 9.f);
  }
  SUBCASE("a larger vox_offset skips the extra bytes") {
    FileSpec spec;
    spec.vox_offset = 368.f;
    const Volume3D vol = read_nifti(
        write_file("offset368.nii", craft_bytes(spec, encode_payload(raw, 16, false))));
    CHECK(vol.data[0] == 9.f);
  }
  SUBCASE("rank-4 files with a single volume are accepted") {
    FileSpec spec;
    spec.dim0 = 4;
    spec.dim4 = 1;
    const Volume3D vol = read_nifti(
        write_file("rank4.nii", craft_bytes(spec, encode_payload(raw, 16, false))));
    CHECK(vol.dims == std::array<int, 3>{2, 2, 2});
  }
  SUBCASE("negative and zero pixdim normalize to usable voxel sizes") {
    FileSpec spec;
    spec.pixdim = {-0.5f, 0.f, 2.f};
    const Volume3D vol = read_nifti(
        write_file("pixdim.nii", craft_bytes(spec, encode_payload(raw, 16, false))));
    CHECK(vol.voxel_size == std::array<float, 3>{0.5f, 1.f, 2.f});
  }
  SUBCASE("non-finite samples are zeroed") {
    FileSpec spec;
    std::vector<unsigned char> payload =
        encode_payload({1, 2, 3, 4, 5, 6, 7, 8}, 16, false);
    const std::uint32_t nan_bits =
        std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    const std::uint32_t inf_bits =
        std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity());
    std::memcpy(payload.data(), &nan_bits, 4);
    std::memcpy(payload.data() + 4, &inf_bits, 4);
    const Volume3D vol = read_nifti(write_file("nonfinite.nii", craft_bytes(spec, payload)));
    CHECK(vol.data[0] == 0.f);
    CHECK(vol.data[1] == 0.f);
    CHECK(vol.data[2] == 3.f);
  }
}

TEST_CASE("malformed files raise typed errors") {
  const std::vector<double> raw{1, 2, 3, 4, 5, 6, 7, 8};

  SUBCASE("wrong magic") {
    FileSpec spec;
    spec.magic = std::string("ni1\0", 4);  // the two-file variant is not supported
    const auto path =
        write_file("badmagic.nii", craft_bytes(spec, encode_payload(raw, 16, false)));
    CHECK_THROWS_AS(read_nifti(path), BadMagic);
  }
  SUBCASE("garbage header") {
    std::vector<unsigned char> bytes(400, 0xAB);
    CHECK_THROWS_AS(read_nifti(write_file("garbage.nii", bytes)), BadMagic);
  }
  SUBCASE("unsupported datatype") {
    FileSpec spec;
    spec.datatype = 32;  // complex64
    spec.bitpix = 64;
    const auto path =
        write_file("complex.nii", craft_bytes(spec, encode_payload(raw, 16, false)));
    CHECK_THROWS_AS(read_nifti(path), UnsupportedDatatype);
  }
  SUBCASE("payload shorter than the dims promise") {
    FileSpec spec;
    auto payload = encode_payload(raw, 16, false);
    payload.resize(payload.size() - 4);
    const auto path = write_file("short.nii", craft_bytes(spec, payload));
    CHECK_THROWS_AS(read_nifti(path), TruncatedFile);
  }
  SUBCASE("a 2D file is not a volume") {
    FileSpec spec;
    spec.dim0 = 2;
    const auto path =
        write_file("flat.nii", craft_bytes(spec, encode_payload(raw, 16, false)));
    CHECK_THROWS_AS(read_nifti(path), NonVolumetric);
  }
  SUBCASE("a rank-4 file with several volumes is rejected") {
    FileSpec spec;
    spec.dim0 = 4;
    spec.dim4 = 2;
    const auto path =
        write_file("multi.nii", craft_bytes(spec, encode_payload(raw, 16, false)));
    CHECK_THROWS_AS(read_nifti(path), NonVolumetric);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_nifti(temp_file("does_not_exist.nii")), IoFailure);
  }
}

TEST_CASE("write then read preserves dims, voxel sizes, and values") {
  Volume3D vol;
  vol.dims = {3, 4, 5};
  vol.voxel_size = {0.5f, 0.25f, 2.f};
  vol.data.resize(vol.voxel_count());
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    vol.data[i] = static_cast<float>(i) * 0.25f - 7.f;  // exact in float32
  }
  const fs::path path = temp_file("roundtrip.nii");
  write_nifti(vol, path);
  const Volume3D back = read_nifti(path);
  CHECK(back.dims == vol.dims);
  CHECK(back.voxel_size == vol.voxel_size);
  CHECK(back.data == vol.data);

  const NiftiHeader hdr = read_nifti_header(path);
  CHECK(hdr.datatype == 16);
  CHECK(hdr.vox_offset == 352.f);
  CHECK(hdr.dim[0] == 3);
}

TEST_CASE("in-plane resampling rescales voxel sizes and keeps z") {
  Volume3D vol;
  vol.dims = {64, 64, 3};
  vol.voxel_size = {4.f, 4.f, 5.f};
  vol.data.assign(vol.voxel_count(), 0.f);
  for (int iz = 0; iz < 3; ++iz) vol.at(10, 20, iz) = 100.f * (iz + 1);
  const Volume3D out = resample_inplane(vol, 512);
  CHECK(out.dims == std::array<int, 3>{512, 512, 3});
  CHECK(out.voxel_size[0] == doctest::Approx(0.5f));
  CHECK(out.voxel_size[1] == doctest::Approx(0.5f));
  CHECK(out.voxel_size[2] == 5.f);

  // a volume already at 512x512 passes through untouched
  const Volume3D same = resample_inplane(out, 512);
  CHECK(same.data == out.data);
}
