#include "mret/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "mret/errors.hpp"

namespace mret {

namespace {

constexpr char kMagic[8] = {'M', 'R', 'E', 'T', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Cursor over the loaded file bytes; every read is bounds-checked so a short
// file surfaces as TruncatedFile instead of undefined behavior.
struct Reader {
  const std::vector<unsigned char>& bytes;
  std::size_t at = 0;

  void need(std::size_t n) const {
    if (at + n > bytes.size()) throw TruncatedFile("model file ends mid-record");
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = static_cast<std::uint32_t>(bytes[at]) |
                            (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
    at += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + at), n);
    at += n;
    return s;
  }
};

nlohmann::json window_to_json(const WindowSpec& w) {
  if (w.auto_range) return {{"mode", "auto"}};
  return {{"mode", "explicit"}, {"lo", w.lo}, {"hi", w.hi}};
}

WindowSpec window_from_json(const nlohmann::json& j) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "auto") return WindowSpec::automatic();
  if (mode == "explicit") {
    return WindowSpec::explicit_range(j.at("lo").get<float>(), j.at("hi").get<float>());
  }
  throw InvalidDescriptor("unknown window mode '" + mode + "'");
}

}  // namespace

void save_model(const Model& model, const ModelProvenance& prov,
                const std::filesystem::path& path) {
  nlohmann::json desc;
  desc["preset"] = model.arch.preset;
  desc["input_side"] = model.arch.input_side;
  desc["classes"] = model.arch.classes;
  desc["provenance"] = {
      {"seed", prov.seed},
      {"selected_epoch", prov.selected_epoch},
      {"window", window_to_json(prov.window)},
      {"input_side", prov.input_side > 0 ? prov.input_side : model.arch.input_side},
  };
  const std::string desc_text = desc.dump();

  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(desc_text.size()));
  out.insert(out.end(), desc_text.begin(), desc_text.end());

  put_u32(out, static_cast<std::uint32_t>(model.params.arrays.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const ParamArray& array : model.params.arrays) {
    put_u32(out, static_cast<std::uint32_t>(array.name.size()));
    out.insert(out.end(), array.name.begin(), array.name.end());
    put_u32(out, static_cast<std::uint32_t>(array.shape.size()));
    for (int d : array.shape) put_u32(out, static_cast<std::uint32_t>(d));
    const std::size_t blob_start = out.size();
    for (double v : array.v) put_f32(out, static_cast<float>(v));
    crc = crc32(crc, out.data() + blob_start, static_cast<uInt>(out.size() - blob_start));
  }
  put_u32(out, static_cast<std::uint32_t>(crc));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw IoFailure("short write to " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path,
                       std::optional<std::string> expect_preset) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoFailure("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                   std::istreambuf_iterator<char>());
  Reader r{bytes};

  const std::string magic = r.str(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw BadMagic(path.string() + " is not a model file");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw VersionMismatch("model format version " + std::to_string(version) +
                          ", this build reads version " + std::to_string(kFormatVersion));
  }
  const std::uint32_t desc_len = r.u32();
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(r.str(desc_len));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidDescriptor(std::string("model descriptor is not valid JSON: ") + e.what());
  }

  LoadedModel lm;
  try {
    const std::string preset = desc.at("preset").get<std::string>();
    if (expect_preset && *expect_preset != preset) {
      throw InvalidDescriptor("model file holds preset '" + preset + "', expected '" +
                              *expect_preset + "'");
    }
    lm.model.arch = NetArch::by_preset(preset, desc.at("input_side").get<int>());
    const nlohmann::json& prov = desc.at("provenance");
    lm.provenance.seed = prov.at("seed").get<std::uint64_t>();
    lm.provenance.selected_epoch = prov.at("selected_epoch").get<int>();
    lm.provenance.window = window_from_json(prov.at("window"));
    lm.provenance.input_side = prov.at("input_side").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidDescriptor(std::string("model descriptor is incomplete: ") + e.what());
  }
  lm.model.init_seed = lm.provenance.seed;
  lm.model.selected_epoch = lm.provenance.selected_epoch;

  lm.model.params = param_layout(lm.model.arch);
  const std::uint32_t array_count = r.u32();
  if (array_count != lm.model.params.arrays.size()) {
    throw InvalidDescriptor("model file holds " + std::to_string(array_count) +
                            " arrays, the architecture expects " +
                            std::to_string(lm.model.params.arrays.size()));
  }
  uLong crc = crc32(0L, Z_NULL, 0);
  for (ParamArray& array : lm.model.params.arrays) {
    const std::string name = r.str(r.u32());
    if (name != array.name) {
      throw InvalidDescriptor("unexpected array '" + name + "', wanted '" + array.name + "'");
    }
    const std::uint32_t ndim = r.u32();
    if (ndim != array.shape.size()) {
      throw InvalidDescriptor("array '" + name + "' has rank " + std::to_string(ndim));
    }
    for (int d : array.shape) {
      const std::uint32_t got = r.u32();
      if (got != static_cast<std::uint32_t>(d)) {
        throw InvalidDescriptor("array '" + name + "' shape does not fit the architecture");
      }
    }
    r.need(array.v.size() * 4);
    crc = crc32(crc, bytes.data() + r.at, static_cast<uInt>(array.v.size() * 4));
    for (double& v : array.v) v = r.f32();
  }
  const std::uint32_t stored_crc = r.u32();
  if (stored_crc != static_cast<std::uint32_t>(crc)) {
    throw ChecksumMismatch("model parameter blob checksum does not match");
  }
  return lm;
}

}  // namespace mret
