#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mret/volume.hpp"

namespace mret {

/// Content regimes of the synthetic corpus. Only WholeBrain is "usable"
/// (label 1); partial-brain and non-brain volumes are label 0.
enum class PhantomClass { WholeBrain, PartialBrain, NonBrain };

int phantom_label(PhantomClass c);
const char* phantom_class_name(PhantomClass c);
PhantomClass phantom_class_from_name(const std::string& name);

/// Generates one phantom volume, deterministic per (class, seed, size).
///   WholeBrain:   skull-like ellipsoid shell (~900 HU) with textured interior
///                 (~30 HU) spanning most of z over ~-1000 HU background.
///   PartialBrain: the same head truncated to its lower 40-70% of z.
///   NonBrain:     soft-tissue cylinders and blobs, no shell anywhere.
/// Requires x, y >= 16 and z >= 4 (InvalidSize otherwise).
Volume3D gen_volume(PhantomClass c, std::uint64_t seed, std::array<int, 3> size);

struct CorpusEntry {
  std::string path;
  std::string subject_id;
  PhantomClass cls = PhantomClass::NonBrain;
  int label = 0;
  std::string split;  // "train" | "val" | "test"
  std::uint64_t seed = 0;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
  int total() const { return train + val + test; }
};

/// Largest-remainder rounding of ratios to integer split sizes summing to count.
SplitCounts counts_from_ratios(int count, const std::array<double, 3>& ratios);

struct CorpusOptions {
  int count = 0;
  double usable_fraction = 0.15;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  SplitCounts splits;                   // must sum to count
  std::array<int, 2> inplane{64, 64};   // phantom x, y
  std::array<int, 2> z_range{8, 80};    // z drawn uniformly from this range
};

/// Generates a labeled corpus: .nii volumes plus a manifest.csv in out_dir.
/// Subjects own several scans each and never straddle splits; the usable count
/// equals round(count * usable_fraction) globally; every corpus contains at
/// least one z < 36 and one z > 36 volume. Bit-reproducible per seed.
std::vector<CorpusEntry> gen_corpus(const CorpusOptions& opt);

}  // namespace mret
