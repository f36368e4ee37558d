#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "mret/manifest.hpp"
#include "mret/model_io.hpp"
#include "mret/montage.hpp"
#include "mret/train.hpp"

namespace mret {

/// Runs fn(0..n-1) on a pool of `workers` threads (inline when workers <= 1).
/// fn must not throw; results must be stored by index so the outcome is
/// independent of scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// .nii / .nii.gz files directly inside dir, sorted by path.
std::vector<std::filesystem::path> list_scans(const std::filesystem::path& dir);

struct MontageJobResult {
  std::string input;
  std::string png_path;
  bool ok = false;
  SamplingPlan plan;
  std::string error;
};

/// Montages every input to out_dir (PNG + JSON sidecar per scan). Per-file
/// failures are recorded, not thrown; the result order matches the inputs.
std::vector<MontageJobResult> montage_batch(const std::vector<std::filesystem::path>& inputs,
                                            const std::filesystem::path& out_dir,
                                            const WindowSpec& window, int workers);

/// Scores every scan with the model; failures land in the row's status.
std::vector<RetrievalRow> retrieve_batch(const LoadedModel& lm,
                                         const std::vector<std::filesystem::path>& scans,
                                         double threshold, const WindowSpec& window,
                                         int workers);

/// Reads each entry's volume, builds its montage once, resizes to input_side.
/// Entries must reference readable scans; failures throw IoFailure with the
/// offending path.
Dataset build_dataset(const std::vector<CorpusEntry>& entries, const WindowSpec& window,
                      int input_side, int workers);

}  // namespace mret
