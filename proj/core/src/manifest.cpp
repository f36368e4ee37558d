#include "mret/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "json.hpp"
#include "mret/errors.hpp"
#include "mret/version.hpp"

namespace mret {

namespace {

// Shortest round-trip decimal for a double; keeps manifests byte-stable
// across runs without printing 17 digits for every value.
std::string render_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Reads `# key=value` preamble lines into header (when asked for), returns
// the remaining lines with the column row dropped.
std::vector<std::string> read_csv_body(const std::filesystem::path& path,
                                       const std::string& expect_columns,
                                       std::map<std::string, std::string>* header) {
  std::ifstream file(path);
  if (!file) throw IoFailure("cannot open " + path.string());
  std::vector<std::string> body;
  std::string line;
  bool saw_columns = false;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header != nullptr) {
        std::string meta = line.substr(1);
        if (!meta.empty() && meta[0] == ' ') meta.erase(0, 1);
        const auto eq = meta.find('=');
        if (eq != std::string::npos) {
          (*header)[meta.substr(0, eq)] = meta.substr(eq + 1);
        }
      }
      continue;
    }
    if (!saw_columns) {
      if (line != expect_columns) {
        throw IoFailure(path.string() + " does not start with the expected columns (" +
                        expect_columns + ")");
      }
      saw_columns = true;
      continue;
    }
    body.push_back(line);
  }
  if (!saw_columns) throw IoFailure(path.string() + " has no column header row");
  return body;
}

void write_header_lines(std::ofstream& file,
                        const std::map<std::string, std::string>& header) {
  for (const auto& [key, value] : header) {
    file << "# " << key << "=" << value << "\n";
  }
}

long long parse_ll(const std::string& s, const char* what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoFailure(std::string("cannot parse ") + what + " '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoFailure(std::string("cannot parse ") + what + " '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoFailure(std::string("cannot parse ") + what + " '" + s + "'");
  }
  return v;
}

nlohmann::json window_json(const WindowSpec& w) {
  if (w.auto_range) return {{"mode", "auto"}};
  return {{"mode", "explicit"}, {"lo", w.lo}, {"hi", w.hi}};
}

}  // namespace

const char* version() { return MRET_VERSION_STRING; }

void write_corpus_manifest(const std::filesystem::path& path,
                           const std::vector<CorpusEntry>& entries,
                           const std::map<std::string, std::string>& header) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  write_header_lines(file, header);
  file << "path,subject_id,class_name,label,split,seed\n";
  for (const CorpusEntry& e : entries) {
    file << sanitize_field(e.path) << ',' << e.subject_id << ','
         << phantom_class_name(e.cls) << ',' << e.label << ',' << e.split << ','
         << e.seed << '\n';
  }
  if (!file.flush()) throw IoFailure("short write to " + path.string());
}

std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& path,
                                              std::map<std::string, std::string>* header) {
  const std::vector<std::string> body =
      read_csv_body(path, "path,subject_id,class_name,label,split,seed", header);
  std::vector<CorpusEntry> entries;
  entries.reserve(body.size());
  for (const std::string& line : body) {
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 6) {
      throw IoFailure(path.string() + " has a malformed row: " + line);
    }
    CorpusEntry e;
    e.path = f[0];
    e.subject_id = f[1];
    e.cls = phantom_class_from_name(f[2]);
    e.label = static_cast<int>(parse_ll(f[3], "label"));
    e.split = f[4];
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      throw IoFailure("unknown split '" + e.split + "' in " + path.string());
    }
    e.seed = parse_u64(f[5], "seed");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_retrieval_manifest(const std::filesystem::path& path,
                              const std::vector<RetrievalRow>& rows,
                              const std::map<std::string, std::string>& header) {
  std::vector<RetrievalRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const RetrievalRow& a, const RetrievalRow& b) { return a.path < b.path; });
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  write_header_lines(file, header);
  file << "path,score,label,z,N,m,mode,status\n";
  for (const RetrievalRow& r : sorted) {
    file << sanitize_field(r.path) << ',';
    if (r.ok) {
      file << render_double(r.score) << ',' << r.label << ',' << r.plan.source_slices << ','
           << r.plan.step << ',' << r.plan.first_slice << ','
           << (r.plan.mode == PlanMode::Sampled ? "sampled" : "padded") << ",ok\n";
    } else {
      file << ",,0,0,0,-," << sanitize_field(r.error) << "\n";
    }
  }
  if (!file.flush()) throw IoFailure("short write to " + path.string());
}

std::vector<RetrievalRow> read_retrieval_manifest(const std::filesystem::path& path,
                                                  std::map<std::string, std::string>* header) {
  const std::vector<std::string> body =
      read_csv_body(path, "path,score,label,z,N,m,mode,status", header);
  std::vector<RetrievalRow> rows;
  rows.reserve(body.size());
  for (const std::string& line : body) {
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 8) {
      throw IoFailure(path.string() + " has a malformed row: " + line);
    }
    RetrievalRow r;
    r.path = f[0];
    r.ok = f[7] == "ok";
    if (r.ok) {
      r.score = parse_double(f[1], "score");
      r.label = static_cast<int>(parse_ll(f[2], "label"));
      r.plan.source_slices = static_cast<int>(parse_ll(f[3], "z"));
      r.plan.step = static_cast<int>(parse_ll(f[4], "N"));
      r.plan.first_slice = static_cast<int>(parse_ll(f[5], "m"));
      r.plan.mode = f[6] == "padded" ? PlanMode::Padded : PlanMode::Sampled;
    } else {
      r.error = f[7];
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_montage_sidecar(const std::filesystem::path& path, const std::string& scan_path,
                           const SamplingPlan& plan, const WindowSpec& requested,
                           const std::array<float, 2>& window_used) {
  nlohmann::json doc;
  doc["scan"] = scan_path;
  doc["source_slices"] = plan.source_slices;
  doc["step"] = plan.step;
  doc["first_slice"] = plan.first_slice;
  doc["mode"] = plan.mode == PlanMode::Sampled ? "sampled" : "padded";
  doc["indices"] = plan.indices;
  doc["window_requested"] = window_json(requested);
  doc["window_used"] = {window_used[0], window_used[1]};
  doc["tool_version"] = version();
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  file << doc.dump(2) << "\n";
  if (!file.flush()) throw IoFailure("short write to " + path.string());
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report,
                       const std::map<std::string, std::string>& header) {
  nlohmann::json doc;
  doc["threshold"] = report.threshold;
  doc["confusion"] = {{"tp", report.cm.tp}, {"fp", report.cm.fp},
                      {"fn", report.cm.fn}, {"tn", report.cm.tn}};
  doc["metrics"] = {
      {"accuracy", report.metrics.accuracy},   {"precision", report.metrics.precision},
      {"recall", report.metrics.recall},       {"f1", report.metrics.f1},
      {"degenerate", report.metrics.degenerate},
  };
  doc["metrics_3dp"] = {
      {"accuracy", render_3dp(report.metrics.accuracy)},
      {"precision", render_3dp(report.metrics.precision)},
      {"recall", render_3dp(report.metrics.recall)},
      {"f1", render_3dp(report.metrics.f1)},
  };
  doc["auc"] = report.auc;
  doc["n_scored"] = report.n_scored;
  doc["n_failed"] = report.n_failed;
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& p : report.curve.points) {
    roc.push_back({p.fpr, p.tpr, p.threshold});
  }
  doc["roc"] = std::move(roc);
  if (!header.empty()) {
    nlohmann::json cfg;
    for (const auto& [key, value] : header) cfg[key] = value;
    doc["config"] = std::move(cfg);
  }
  doc["tool_version"] = version();
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  file << doc.dump(2) << "\n";
  if (!file.flush()) throw IoFailure("short write to " + path.string());
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoFailure("cannot open " + path.string() + " for writing");
  file << "fpr,tpr,threshold\n";
  for (const RocPoint& p : curve.points) {
    file << render_double(p.fpr) << ',' << render_double(p.tpr) << ','
         << render_double(p.threshold) << '\n';
  }
  if (!file.flush()) throw IoFailure("short write to " + path.string());
}

std::string render_3dp(double value) {
  const long long thousandths = std::llround(value * 1000.0);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%lld.%03lld", thousandths < 0 ? "-" : "",
                std::llabs(thousandths) / 1000, std::llabs(thousandths) % 1000);
  return buf;
}

}  // namespace mret
