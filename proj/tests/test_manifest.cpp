#include "mret/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mret/errors.hpp"
#include "mret/version.hpp"

using namespace mret;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mret_manifest_tests";
  fs::create_directories(dir);
  return dir / name;
}

CorpusEntry entry(const std::string& path, const std::string& subject, PhantomClass cls,
                  const std::string& split, std::uint64_t seed) {
  CorpusEntry e;
  e.path = path;
  e.subject_id = subject;
  e.cls = cls;
  e.label = phantom_label(cls);
  e.split = split;
  e.seed = seed;
  return e;
}

}  // namespace

TEST_CASE("tool version is a dotted triple") {
  const std::string v = version();
  REQUIRE_FALSE(v.empty());
  CHECK(std::count(v.begin(), v.end(), '.') == 2);
}

TEST_CASE("corpus manifest round trips entries and header") {
  const std::vector<CorpusEntry> entries = {
      entry("/data/a_00.nii", "a", PhantomClass::WholeBrain, "train", 7),
      // seeds are full-width 64-bit values; the top bit must survive
      entry("/data/b_00.nii", "b", PhantomClass::NonBrain, "val",
            18446744073709551615ull),
      entry("/data/b_01.nii", "b", PhantomClass::PartialBrain, "test", 0),
  };
  const fs::path path = temp_file("corpus.csv");
  write_corpus_manifest(path, entries, {{"seed", "42"}, {"count", "3"}});

  std::map<std::string, std::string> header;
  const auto back = read_corpus_manifest(path, &header);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].path == entries[i].path);
    CHECK(back[i].subject_id == entries[i].subject_id);
    CHECK(back[i].cls == entries[i].cls);
    CHECK(back[i].label == entries[i].label);
    CHECK(back[i].split == entries[i].split);
    CHECK(back[i].seed == entries[i].seed);
  }
  CHECK(header["seed"] == "42");
  CHECK(header["count"] == "3");
}

TEST_CASE("corpus manifest rejects malformed input") {
  const fs::path path = temp_file("bad.csv");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_corpus_manifest(temp_file("nope.csv")), IoFailure);
  }
  SUBCASE("wrong column row") {
    std::ofstream(path) << "path,who,label\n/x,a,1\n";
    CHECK_THROWS_AS(read_corpus_manifest(path), IoFailure);
  }
  SUBCASE("unknown split") {
    std::ofstream(path) << "path,subject_id,class_name,label,split,seed\n"
                        << "/x,a,whole_brain,1,holdout,5\n";
    CHECK_THROWS_AS(read_corpus_manifest(path), IoFailure);
  }
  SUBCASE("non-numeric seed") {
    std::ofstream(path) << "path,subject_id,class_name,label,split,seed\n"
                        << "/x,a,whole_brain,1,train,soon\n";
    CHECK_THROWS_AS(read_corpus_manifest(path), IoFailure);
  }
}

TEST_CASE("retrieval manifest sorts rows and keeps failures") {
  RetrievalRow ok_row;
  ok_row.path = "/scans/zeta.nii";
  ok_row.ok = true;
  ok_row.score = 0.9615384615384616;
  ok_row.label = 1;
  ok_row.plan = plan_sampling(72);

  RetrievalRow failed;
  failed.path = "/scans/alpha.nii";
  failed.ok = false;
  failed.error = "bad magic, a comma\nand a newline";

  const fs::path path = temp_file("retrieval.csv");
  write_retrieval_manifest(path, {ok_row, failed}, {{"model", "m.bin"}});

  std::map<std::string, std::string> header;
  const auto back = read_retrieval_manifest(path, &header);
  REQUIRE(back.size() == 2);
  CHECK(header["model"] == "m.bin");

  // sorted by path: the failed alpha row now comes first
  CHECK(back[0].path == "/scans/alpha.nii");
  CHECK_FALSE(back[0].ok);
  CHECK(back[0].error == "bad magic; a comma;and a newline");

  CHECK(back[1].path == "/scans/zeta.nii");
  CHECK(back[1].ok);
  CHECK(back[1].score == 0.9615384615384616);  // shortest round-trip rendering
  CHECK(back[1].label == 1);
  CHECK(back[1].plan.source_slices == 72);
  CHECK(back[1].plan.step == 2);
  CHECK(back[1].plan.first_slice == 2);
  CHECK(back[1].plan.mode == PlanMode::Sampled);
}

TEST_CASE("metric rendering rounds half up to three decimals") {
  CHECK(render_3dp(150.0 / 156.0) == "0.962");
  CHECK(render_3dp(988.0 / 1000.0) == "0.988");
  CHECK(render_3dp(1.0) == "1.000");
  CHECK(render_3dp(0.0) == "0.000");
  CHECK(render_3dp(0.0005) == "0.001");
  CHECK(render_3dp(0.98849) == "0.988");
  CHECK(render_3dp(0.9995) == "1.000");
}

TEST_CASE("eval report serializes every section") {
  EvalReport report;
  report.threshold = 0.5;
  report.cm.tp = 150;
  report.cm.fp = 6;
  report.cm.fn = 6;
  report.cm.tn = 838;
  report.metrics = prf1(report.cm);
  report.auc = 0.9965;
  report.curve.points = {{0.0, 0.0, 1e30}, {0.5, 1.0, 0.5}, {1.0, 1.0, 0.1}};
  report.n_scored = 1000;
  report.n_failed = 3;

  const fs::path path = temp_file("report.json");
  write_eval_report(path, report, {{"model", "m.bin"}, {"threshold", "0.5"}});

  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["confusion"]["tp"] == 150);
  CHECK(j["confusion"]["tn"] == 838);
  CHECK(j["metrics"]["accuracy"].get<double>() == doctest::Approx(0.988));
  CHECK(j["metrics_3dp"]["accuracy"] == "0.988");
  CHECK(j["metrics_3dp"]["precision"] == "0.962");
  CHECK(j["metrics_3dp"]["recall"] == "0.962");
  CHECK(j["metrics_3dp"]["f1"] == "0.962");
  CHECK(j["auc"].get<double>() == doctest::Approx(0.9965));
  CHECK(j["n_scored"] == 1000);
  CHECK(j["n_failed"] == 3);
  CHECK(j["threshold"].get<double>() == 0.5);
  CHECK(j["roc"].size() == 3);
  CHECK(j["config"]["model"] == "m.bin");
  CHECK(j["tool_version"] == version());
}

TEST_CASE("roc csv lists one point per row") {
  RocCurve curve;
  curve.points = {{0.0, 0.0, 1e30}, {0.25, 0.75, 0.6}, {1.0, 1.0, 0.0}};
  const fs::path path = temp_file("roc.csv");
  write_roc_csv(path, curve);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "fpr,tpr,threshold");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("montage sidecar records the plan and windows") {
  const fs::path path = temp_file("sidecar.json");
  const SamplingPlan plan = plan_sampling(100);
  write_montage_sidecar(path, "/scans/x.nii", plan, WindowSpec::automatic(),
                        {-250.f, 500.f});

  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["scan"] == "/scans/x.nii");
  CHECK(j["source_slices"] == 100);
  CHECK(j["step"] == 2);
  CHECK(j["first_slice"] == 16);
  CHECK(j["mode"] == "sampled");
  CHECK(j["indices"].size() == 36);
  CHECK(j["indices"][0] == 16);
  CHECK(j["window_requested"]["mode"] == "auto");
  CHECK(j["window_used"][0].get<double>() == doctest::Approx(-250.0));
  CHECK(j["window_used"][1].get<double>() == doctest::Approx(500.0));
  CHECK(j["tool_version"] == version());
}
