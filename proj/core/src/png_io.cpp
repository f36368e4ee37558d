#include "mret/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "mret/errors.hpp"

// Minimal PNG codec for 8-bit grayscale. The writer emits filter 0 scanlines
// with a fixed deflate level so identical images give byte-identical files.

namespace mret {
namespace {

const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>(v & 0xff));
}

std::uint32_t read_u32_be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const unsigned char* data, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_pos, static_cast<uInt>(4 + len));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  if (img.width < 1 || img.height < 1) throw InvalidSize("save_png: empty image");

  // scanlines, each prefixed with filter byte 0
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.height) * (img.width + 1));
  for (int r = 0; r < img.height; ++r) {
    unsigned char* line = raw.data() + static_cast<std::size_t>(r) * (img.width + 1);
    line[0] = 0;
    for (int c = 0; c < img.width; ++c) {
      const double v = std::floor(img.at(r, c) * 255.0 + 0.5);  // round half up
      line[1 + c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
    }
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoFailure("save_png: deflate failed");
  }
  comp.resize(comp_len);

  std::vector<unsigned char> out;
  out.insert(out.end(), kSignature, kSignature + 8);
  unsigned char ihdr[13];
  ihdr[0] = static_cast<unsigned char>(img.width >> 24);
  ihdr[1] = static_cast<unsigned char>((img.width >> 16) & 0xff);
  ihdr[2] = static_cast<unsigned char>((img.width >> 8) & 0xff);
  ihdr[3] = static_cast<unsigned char>(img.width & 0xff);
  ihdr[4] = static_cast<unsigned char>(img.height >> 24);
  ihdr[5] = static_cast<unsigned char>((img.height >> 16) & 0xff);
  ihdr[6] = static_cast<unsigned char>((img.height >> 8) & 0xff);
  ihdr[7] = static_cast<unsigned char>(img.height & 0xff);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 0;   // grayscale
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // no interlace
  append_chunk(out, "IHDR", ihdr, 13);
  append_chunk(out, "IDAT", comp.data(), comp.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("write failed on " + path.string());
}

GrayImage load_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw BadMagic(path.string() + ": not a PNG file");
  }

  int width = 0, height = 0;
  std::vector<unsigned char> idat;
  std::size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32_be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw TruncatedFile(path.string() + ": chunk overruns file");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const unsigned char* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(read_u32_be(data));
      height = static_cast<int>(read_u32_be(data + 4));
      if (data[8] != 8 || data[9] != 0 || data[12] != 0) {
        throw UnsupportedDatatype(path.string() + ": only non-interlaced grayscale-8 supported");
      }
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width < 1 || height < 1 || idat.empty()) throw TruncatedFile(path.string() + ": missing IHDR/IDAT");

  const std::size_t stride = static_cast<std::size_t>(width) + 1;
  std::vector<unsigned char> raw(stride * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size()) {
    throw TruncatedFile(path.string() + ": inflate failed");
  }

  GrayImage img(width, height);
  std::vector<unsigned char> prev(width, 0), cur(width, 0);
  for (int r = 0; r < height; ++r) {
    const unsigned char* line = raw.data() + static_cast<std::size_t>(r) * stride;
    const int filter = line[0];
    for (int c = 0; c < width; ++c) {
      const int x = line[1 + c];
      const int a = c > 0 ? cur[c - 1] : 0;
      const int b = prev[c];
      const int d = c > 0 ? prev[c - 1] : 0;
      int value;
      switch (filter) {
        case 0: value = x; break;
        case 1: value = x + a; break;
        case 2: value = x + b; break;
        case 3: value = x + (a + b) / 2; break;
        case 4: value = x + paeth(a, b, d); break;
        default: throw UnsupportedDatatype(path.string() + ": unknown filter type");
      }
      cur[c] = static_cast<unsigned char>(value & 0xff);
      img.at(r, c) = static_cast<float>(cur[c]) / 255.0f;
    }
    std::swap(prev, cur);
  }
  return img;
}

}  // namespace mret
