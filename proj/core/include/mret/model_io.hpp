#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mret/montage.hpp"
#include "mret/net.hpp"

namespace mret {

/// Training-time context a model file carries so inference can reproduce the
/// exact input pipeline.
struct ModelProvenance {
  std::uint64_t seed = 0;
  int selected_epoch = -1;
  WindowSpec window;    // montage window used for training inputs
  int input_side = 0;   // duplicated from the descriptor for quick access
};

/// Versioned binary container: magic, format version, JSON descriptor, then
/// per-array shape headers with little-endian float32 parameter blobs and a
/// trailing CRC32 over the blobs. load(save(m)) is identity up to f32 rounding.
void save_model(const Model& model, const ModelProvenance& prov,
                const std::filesystem::path& path);

struct LoadedModel {
  Model model;
  ModelProvenance provenance;
};

/// Throws BadMagic, VersionMismatch, TruncatedFile, ChecksumMismatch; when
/// expect_preset is given, a differing stored preset raises InvalidDescriptor.
LoadedModel load_model(const std::filesystem::path& path,
                       std::optional<std::string> expect_preset = {});

}  // namespace mret
