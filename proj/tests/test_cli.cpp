// Black-box checks of the installed command-line surface: exit codes, file
// outputs, and cross-run byte stability, all through the real binary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mret/manifest.hpp"

using namespace mret;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mret_cli_tests";

int run(const std::string& args) {
  const std::string cmd = std::string(MRET_CLI_PATH) + " " + args + " > " +
                          (kWork / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string last_log() {
  std::ifstream in(kWork / "last.log");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  fs::create_directories(kWork);
  CHECK(run("--version") == 0);
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);                             // a subcommand is required
  CHECK(run("transmogrify") == 2);                 // unknown subcommand
  CHECK(run("phantom --count 5") == 2);            // missing required --out
  CHECK(run("montage --out x") == 2);              // missing inputs
  CHECK(run("phantom --out x --count 0") == 2);    // count must be positive
  CHECK(run("phantom --out x --count 5 --usable-fraction 1.5") == 2);
  CHECK(run("retrieve --model m --in d --out o --threshold 2") == 2);
  CHECK(run("phantom --out x --count 5 --split-counts 1 1 1") == 2);  // sums to 3
}

TEST_CASE("the full pipeline runs through the binary") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const fs::path corpus = kWork / "corpus";

  // small corpus: 12 scans, splits 6/3/3, 4 usable overall
  REQUIRE(run("phantom --out " + q(corpus) +
              " --count 12 --seed 9 --usable-fraction 0.34 --split-counts 6 3 3"
              " --inplane 24 24 --z-range 8 40") == 0);
  REQUIRE(fs::exists(corpus / "manifest.csv"));
  const auto entries = read_corpus_manifest(corpus / "manifest.csv");
  REQUIRE(entries.size() == 12);

  SUBCASE("montage renders every scan plus sidecars") {
    const fs::path out = kWork / "montages";
    CHECK(run("montage " + q(corpus) + " --out " + q(out)) == 0);
    int pngs = 0, sidecars = 0;
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().extension() == ".png") ++pngs;
      if (e.path().extension() == ".json") ++sidecars;
    }
    CHECK(pngs == 12);
    CHECK(sidecars == 12);
  }

  SUBCASE("montage reports per-file failures and exits 1") {
    const fs::path mixed = kWork / "mixed";
    fs::create_directories(mixed);
    fs::copy_file(entries[0].path, mixed / "good.nii");
    std::ofstream(mixed / "junk.nii") << "this is not a scan";

    const fs::path out = kWork / "mixed_out";
    CHECK(run("montage " + q(mixed) + " --out " + q(out)) == 1);
    CHECK(fs::exists(out / "good.png"));        // the good scan still rendered
    CHECK_FALSE(fs::exists(out / "junk.png"));
    CHECK(last_log().find("fail") != std::string::npos);
  }

  SUBCASE("montage of a scanless directory is a usage error") {
    const fs::path empty = kWork / "empty";
    fs::create_directories(empty);
    CHECK(run("montage " + q(empty) + " --out " + q(kWork / "never")) == 2);
  }

  SUBCASE("train, retrieve, evaluate") {
    const fs::path model = kWork / "model.bin";
    const fs::path manifest = corpus / "manifest.csv";
    REQUIRE(run("train --train " + q(manifest) + " --val " + q(manifest) + " --out " +
                q(model) +
                " --preset micro --input-side 32 --epochs 2 --batch-size 4 --seed 3") == 0);
    REQUIRE(fs::exists(model));

    const fs::path history = kWork / "model.bin.history.json";
    REQUIRE(fs::exists(history));
    std::ifstream hist_in(history);
    const nlohmann::json hist = nlohmann::json::parse(hist_in);
    CHECK(hist["epochs"].size() == 2);
    CHECK(hist["config"]["preset"] == "micro");
    CHECK(hist["config"]["input_side"] == 32);
    CHECK(hist["selected_epoch"].get<int>() >= 0);

    SUBCASE("retrieval manifests are byte-identical across worker counts") {
      const fs::path out1 = kWork / "retr1";
      const fs::path out3 = kWork / "retr3";
      REQUIRE(run("retrieve --model " + q(model) + " --in " + q(corpus) + " --out " +
                  q(out1) + " --workers 1") == 0);
      REQUIRE(run("retrieve --model " + q(model) + " --in " + q(corpus) + " --out " +
                  q(out3) + " --workers 3") == 0);
      CHECK(slurp(out1 / "retrieval.csv") == slurp(out3 / "retrieval.csv"));

      const auto rows = read_retrieval_manifest(out1 / "retrieval.csv");
      CHECK(rows.size() == 12);
      std::map<std::string, std::string> header;
      read_retrieval_manifest(out1 / "retrieval.csv", &header);
      CHECK(header["input_side"] == "32");
      CHECK(header.count("tool_version") == 1);

      SUBCASE("evaluate joins predictions to truth") {
        const fs::path report = kWork / "report.json";
        REQUIRE(run("evaluate --pred " + q(out1 / "retrieval.csv") + " --truth " +
                    q(manifest) + " --out " + q(report)) == 0);
        std::ifstream rep_in(report);
        const nlohmann::json rep = nlohmann::json::parse(rep_in);
        CHECK(rep["n_scored"] == 12);
        CHECK(rep["n_failed"] == 0);
        CHECK(fs::exists(kWork / "report.json.roc.csv"));
      }

      SUBCASE("a prediction outside the truth manifest fails the join") {
        // keep only half the truth rows so some scored paths have no label
        std::vector<CorpusEntry> half(entries.begin(), entries.begin() + 6);
        const fs::path short_truth = kWork / "half_truth.csv";
        write_corpus_manifest(short_truth, half, {});
        CHECK(run("evaluate --pred " + q(out1 / "retrieval.csv") + " --truth " +
                  q(short_truth) + " --out " + q(kWork / "never.json")) == 1);
      }
    }

    SUBCASE("retrieving from an empty directory is a usage error") {
      const fs::path empty = kWork / "empty2";
      fs::create_directories(empty);
      CHECK(run("retrieve --model " + q(model) + " --in " + q(empty) + " --out " +
                q(kWork / "never")) == 2);
    }

    SUBCASE("a worker-count environment default is accepted") {
      setenv("MRET_WORKERS", "3", 1);
      const fs::path out_env = kWork / "retr_env";
      CHECK(run("retrieve --model " + q(model) + " --in " + q(corpus) + " --out " +
                q(out_env)) == 0);
      setenv("MRET_WORKERS", "not-a-number", 1);
      const fs::path out_bad = kWork / "retr_env_bad";
      CHECK(run("retrieve --model " + q(model) + " --in " + q(corpus) + " --out " +
                q(out_bad)) == 0);
      unsetenv("MRET_WORKERS");
      CHECK(slurp(out_env / "retrieval.csv") == slurp(out_bad / "retrieval.csv"));
    }
  }

  SUBCASE("a split filter that matches nothing is a usage error") {
    CHECK(run("train --train " + q(corpus / "manifest.csv") + " --val " +
              q(corpus / "manifest.csv") + " --out " + q(kWork / "never.bin") +
              " --train-split nope --epochs 1") == 2);
  }

  SUBCASE("single-class validation data is a runtime failure") {
    std::vector<CorpusEntry> skewed;
    for (const auto& e : entries) {
      if (e.split == "val" && e.label == 1) continue;  // drop usable val rows
      skewed.push_back(e);
    }
    const fs::path skewed_manifest = kWork / "skewed.csv";
    write_corpus_manifest(skewed_manifest, skewed, {});
    CHECK(run("train --train " + q(skewed_manifest) + " --val " + q(skewed_manifest) +
              " --out " + q(kWork / "never.bin") +
              " --preset micro --input-side 32 --epochs 1") == 1);
  }
}
