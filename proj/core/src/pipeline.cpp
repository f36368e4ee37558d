#include "mret/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <string>
#include <thread>

#include "mret/errors.hpp"
#include "mret/png_io.hpp"
#include "mret/volume.hpp"

namespace mret {

namespace {

// "scan.nii" / "scan.nii.gz" -> "scan"; anything else keeps its full name.
std::string scan_basename(const std::filesystem::path& p) {
  std::string name = p.filename().string();
  if (name.size() > 7 && name.ends_with(".nii.gz")) return name.substr(0, name.size() - 7);
  if (name.size() > 4 && name.ends_with(".nii")) return name.substr(0, name.size() - 4);
  return name;
}

}  // namespace

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t pool = std::min<std::size_t>(std::max(workers, 1), n);
  if (pool <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (std::size_t t = 0; t < pool; ++t) {
    threads.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

std::vector<std::filesystem::path> list_scans(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoFailure(dir.string() + " is not a readable directory");
  }
  std::vector<std::filesystem::path> scans;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".nii") || name.ends_with(".nii.gz")) {
      scans.push_back(entry.path());
    }
  }
  std::sort(scans.begin(), scans.end());
  return scans;
}

std::vector<MontageJobResult> montage_batch(const std::vector<std::filesystem::path>& inputs,
                                            const std::filesystem::path& out_dir,
                                            const WindowSpec& window, int workers) {
  std::filesystem::create_directories(out_dir);
  std::vector<MontageJobResult> results(inputs.size());
  parallel_for(inputs.size(), workers, [&](std::size_t i) {
    MontageJobResult& r = results[i];
    r.input = inputs[i].string();
    const std::string base = scan_basename(inputs[i]);
    try {
      const Volume3D vol = read_nifti(inputs[i]);
      const MontageResult montage = make_montage(vol, window);
      const std::filesystem::path png_path = out_dir / (base + ".png");
      save_png(montage.image, png_path);
      write_montage_sidecar(out_dir / (base + ".json"), r.input, montage.plan, window,
                            montage.window_used);
      r.png_path = png_path.string();
      r.plan = montage.plan;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return results;
}

std::vector<RetrievalRow> retrieve_batch(const LoadedModel& lm,
                                         const std::vector<std::filesystem::path>& scans,
                                         double threshold, const WindowSpec& window,
                                         int workers) {
  std::vector<RetrievalRow> rows(scans.size());
  const int input_side = lm.model.arch.input_side;
  parallel_for(scans.size(), workers, [&](std::size_t i) {
    RetrievalRow& row = rows[i];
    row.path = std::filesystem::weakly_canonical(scans[i]).string();
    try {
      const Volume3D vol = read_nifti(scans[i]);
      const MontageResult montage = make_montage(vol, window);
      const double score =
          predict_prepared(lm.model, resize_to_side(montage.image, input_side));
      row.score = score;
      row.label = score >= threshold ? 1 : 0;
      row.plan = montage.plan;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

Dataset build_dataset(const std::vector<CorpusEntry>& entries, const WindowSpec& window,
                      int input_side, int workers) {
  Dataset set;
  set.images.resize(entries.size());
  set.labels.resize(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    try {
      const Volume3D vol = read_nifti(entries[i].path);
      const MontageResult montage = make_montage(vol, window);
      set.images[i] = resize_to_side(montage.image, input_side);
      set.labels[i] = entries[i].label;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i].empty()) {
      throw IoFailure("cannot build a montage for " + entries[i].path + ": " + errors[i]);
    }
  }
  return set;
}

}  // namespace mret
