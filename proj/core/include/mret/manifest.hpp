#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mret/metrics.hpp"
#include "mret/montage.hpp"
#include "mret/phantom.hpp"

namespace mret {

/// Writes the corpus manifest CSV: `# key=value` header lines, then
/// path,subject_id,class_name,label,split,seed rows.
void write_corpus_manifest(const std::filesystem::path& path,
                           const std::vector<CorpusEntry>& entries,
                           const std::map<std::string, std::string>& header);

/// Reads a corpus manifest; `# ` lines are collected into header.
std::vector<CorpusEntry> read_corpus_manifest(
    const std::filesystem::path& path,
    std::map<std::string, std::string>* header = nullptr);

/// One scored scan in a retrieval run.
struct RetrievalRow {
  std::string path;
  bool ok = false;
  double score = 0.0;
  int label = 0;
  SamplingPlan plan;
  std::string error;  // empty when ok
};

/// Writes the retrieval manifest CSV, rows sorted by path:
/// path,score,label,z,N,m,mode,status.
void write_retrieval_manifest(const std::filesystem::path& path,
                              const std::vector<RetrievalRow>& rows,
                              const std::map<std::string, std::string>& header);

std::vector<RetrievalRow> read_retrieval_manifest(
    const std::filesystem::path& path,
    std::map<std::string, std::string>* header = nullptr);

/// Montage sidecar: JSON with z, N, m, mode, the resolved window, tool version.
void write_montage_sidecar(const std::filesystem::path& path,
                           const std::string& scan_path, const SamplingPlan& plan,
                           const WindowSpec& requested,
                           const std::array<float, 2>& window_used);

struct EvalReport {
  double threshold = 0.5;
  ConfusionMatrix cm;
  Prf1 metrics;
  double auc = 0.0;
  RocCurve curve;
  long long n_scored = 0;
  long long n_failed = 0;  // prediction rows without a score
};

/// JSON report: confusion counts, full-precision metrics plus their 3-decimal
/// rendering, ROC points, AUC, threshold, config header.
void write_eval_report(const std::filesystem::path& path, const EvalReport& report,
                       const std::map<std::string, std::string>& header);

/// fpr,tpr,threshold rows for external plotting.
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);

/// Renders a metric the way reports display it (3 decimals, half up).
std::string render_3dp(double value);

}  // namespace mret
