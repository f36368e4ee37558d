// Command-line front end: phantom | montage | train | retrieve | evaluate.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mret/errors.hpp"
#include "mret/manifest.hpp"
#include "mret/model_io.hpp"
#include "mret/phantom.hpp"
#include "mret/pipeline.hpp"
#include "mret/train.hpp"
#include "mret/version.hpp"

namespace {

namespace fs = std::filesystem;

/// Command-line misuse discovered after parsing (bad token combinations,
/// empty inputs); mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_workers() {
  const char* env = std::getenv("MRET_WORKERS");
  if (env == nullptr) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(v);
}

/// --window accepts either `auto` or two numbers LO HI.
mret::WindowSpec parse_window(const std::vector<std::string>& tokens) {
  if (tokens.empty()) return mret::WindowSpec{};
  if (tokens.size() == 1) {
    if (tokens[0] == "auto") return mret::WindowSpec::automatic();
    throw UsageError("--window takes 'auto' or two numbers LO HI, got '" + tokens[0] + "'");
  }
  float lo = 0.f, hi = 0.f;
  try {
    lo = std::stof(tokens[0]);
    hi = std::stof(tokens[1]);
  } catch (const std::exception&) {
    throw UsageError("--window bounds must be numbers, got '" + tokens[0] + " " + tokens[1] +
                     "'");
  }
  if (!(lo < hi)) throw UsageError("--window needs LO < HI");
  return mret::WindowSpec::explicit_range(lo, hi);
}

std::string window_text(const mret::WindowSpec& w) {
  if (w.auto_range) return "auto";
  return std::to_string(w.lo) + ".." + std::to_string(w.hi);
}

struct PhantomArgs {
  std::string out_dir;
  int count = 0;
  double usable_fraction = 0.15;
  std::uint64_t seed = 1;
  std::vector<double> split_ratios{0.7, 0.15, 0.15};
  std::vector<int> split_counts;
  std::vector<int> inplane{64, 64};
  std::vector<int> z_range{8, 80};
};

int run_phantom(const PhantomArgs& args) {
  mret::CorpusOptions opt;
  opt.count = args.count;
  opt.usable_fraction = args.usable_fraction;
  opt.seed = args.seed;
  opt.out_dir = args.out_dir;
  opt.inplane = {args.inplane[0], args.inplane[1]};
  opt.z_range = {args.z_range[0], args.z_range[1]};
  if (!args.split_counts.empty()) {
    opt.splits = {args.split_counts[0], args.split_counts[1], args.split_counts[2]};
    if (opt.splits.total() != args.count) {
      throw UsageError("--split-counts must sum to --count");
    }
  } else {
    opt.splits = mret::counts_from_ratios(
        args.count, {args.split_ratios[0], args.split_ratios[1], args.split_ratios[2]});
  }

  const std::vector<mret::CorpusEntry> entries = mret::gen_corpus(opt);
  int usable = 0;
  for (const auto& e : entries) usable += e.label;
  std::cout << "corpus: " << entries.size() << " scans (" << usable << " usable) in "
            << args.out_dir << "\n"
            << "splits: train " << opt.splits.train << ", val " << opt.splits.val
            << ", test " << opt.splits.test << "\n"
            << "manifest: " << (fs::path(args.out_dir) / "manifest.csv").string() << "\n";
  return 0;
}

struct MontageArgs {
  std::vector<std::string> inputs;
  std::string out_dir;
  std::vector<std::string> window_tokens;
  int workers = 1;
};

int run_montage(const MontageArgs& args) {
  const mret::WindowSpec window = parse_window(args.window_tokens);
  std::vector<fs::path> scans;
  for (const std::string& input : args.inputs) {
    const fs::path p(input);
    if (fs::is_directory(p)) {
      const auto found = mret::list_scans(p);
      scans.insert(scans.end(), found.begin(), found.end());
    } else {
      scans.push_back(p);
    }
  }
  if (scans.empty()) throw UsageError("no scans among the given inputs");

  const auto results = mret::montage_batch(scans, args.out_dir, window, args.workers);
  int failed = 0;
  for (const auto& r : results) {
    if (r.ok) {
      std::cout << "ok   " << r.input << " -> " << r.png_path << "\n";
    } else {
      ++failed;
      std::cout << "fail " << r.input << ": " << r.error << "\n";
    }
  }
  std::cout << results.size() - failed << " of " << results.size() << " scans montaged\n";
  return failed == 0 ? 0 : 1;
}

struct TrainArgs {
  std::string train_manifest;
  std::string val_manifest;
  std::string model_path;
  std::string history_path;  // defaults next to the model
  std::string train_split = "train";
  std::string val_split = "val";
  std::string preset = "micro";
  std::optional<int> input_side;
  int epochs = 100;
  int batch_size = 8;
  double lr = 1e-4;
  std::vector<double> class_weights{1.0, 10.0};
  std::uint64_t seed = 1;
  std::vector<std::string> window_tokens;
  int workers = 1;
};

std::vector<mret::CorpusEntry> entries_for_split(const std::string& manifest,
                                                 const std::string& split) {
  std::vector<mret::CorpusEntry> all = mret::read_corpus_manifest(manifest);
  std::vector<mret::CorpusEntry> kept;
  for (auto& e : all) {
    if (e.split == split) kept.push_back(std::move(e));
  }
  if (kept.empty()) {
    throw UsageError(manifest + " has no rows with split '" + split + "'");
  }
  return kept;
}

int run_train(const TrainArgs& args) {
  const mret::WindowSpec window = parse_window(args.window_tokens);
  const mret::NetArch arch = mret::NetArch::by_preset(args.preset, args.input_side);

  const auto train_entries = entries_for_split(args.train_manifest, args.train_split);
  const auto val_entries = entries_for_split(args.val_manifest, args.val_split);
  std::cout << "building montages: " << train_entries.size() << " train, "
            << val_entries.size() << " val\n";
  const mret::Dataset train_set =
      mret::build_dataset(train_entries, window, arch.input_side, args.workers);
  const mret::Dataset val_set =
      mret::build_dataset(val_entries, window, arch.input_side, args.workers);

  mret::TrainConfig cfg;
  cfg.max_epochs = args.epochs;
  cfg.batch_size = args.batch_size;
  cfg.learning_rate = args.lr;
  cfg.class_weights = {args.class_weights[0], args.class_weights[1]};
  cfg.seed = args.seed;

  const mret::TrainResult result = mret::train(train_set, val_set, arch, cfg);
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const mret::EpochStats& s = result.history[e];
    std::cout << "epoch " << e + 1 << "/" << result.history.size() << "  loss "
              << mret::render_3dp(s.train_loss) << "  val f1 " << mret::render_3dp(s.val_f1)
              << "  val auc " << mret::render_3dp(s.val_auc) << "\n";
  }
  std::cout << "selected epoch " << result.selected_epoch + 1 << " (val f1 "
            << mret::render_3dp(result.history[result.selected_epoch].val_f1) << ", auc "
            << mret::render_3dp(result.history[result.selected_epoch].val_auc) << ")\n";

  mret::ModelProvenance prov;
  prov.seed = args.seed;
  prov.selected_epoch = result.selected_epoch;
  prov.window = window;
  prov.input_side = arch.input_side;
  mret::save_model(result.model, prov, args.model_path);
  std::cout << "model: " << args.model_path << "\n";

  nlohmann::json history;
  history["config"] = {
      {"preset", args.preset},
      {"input_side", arch.input_side},
      {"epochs", args.epochs},
      {"batch_size", args.batch_size},
      {"lr", args.lr},
      {"class_weights", {args.class_weights[0], args.class_weights[1]}},
      {"seed", args.seed},
      {"window", window_text(window)},
  };
  history["selected_epoch"] = result.selected_epoch;
  nlohmann::json epochs = nlohmann::json::array();
  for (const mret::EpochStats& s : result.history) {
    epochs.push_back({{"train_loss", s.train_loss},
                      {"val_accuracy", s.val_accuracy},
                      {"val_precision", s.val_precision},
                      {"val_recall", s.val_recall},
                      {"val_f1", s.val_f1},
                      {"val_auc", s.val_auc}});
  }
  history["epochs"] = std::move(epochs);
  history["tool_version"] = mret::version();
  const std::string history_path =
      args.history_path.empty() ? args.model_path + ".history.json" : args.history_path;
  std::ofstream hist_file(history_path, std::ios::trunc);
  if (!hist_file) throw mret::IoFailure("cannot open " + history_path + " for writing");
  hist_file << history.dump(2) << "\n";
  std::cout << "history: " << history_path << "\n";
  return 0;
}

struct RetrieveArgs {
  std::string model_path;
  std::string scan_dir;
  std::string out_dir;
  double threshold = 0.5;
  std::optional<int> input_side;
  std::vector<std::string> window_tokens;
  bool window_given = false;
  int workers = 1;
};

int run_retrieve(const RetrieveArgs& args) {
  mret::LoadedModel lm = mret::load_model(args.model_path);
  if (args.input_side && *args.input_side != lm.model.arch.input_side) {
    // The nets are fully convolutional up to the global pool, so the stored
    // parameters remain valid at a different input side.
    lm.model.arch = mret::NetArch::by_preset(lm.model.arch.preset, *args.input_side);
  }
  const mret::WindowSpec window =
      args.window_given ? parse_window(args.window_tokens) : lm.provenance.window;

  const auto scans = mret::list_scans(args.scan_dir);
  if (scans.empty()) throw UsageError("no .nii or .nii.gz scans in " + args.scan_dir);

  const auto rows =
      mret::retrieve_batch(lm, scans, args.threshold, window, args.workers);
  int retrieved = 0, failed = 0;
  for (const auto& r : rows) {
    if (!r.ok) {
      ++failed;
    } else if (r.label == 1) {
      ++retrieved;
    }
  }

  fs::create_directories(args.out_dir);
  const fs::path manifest_path = fs::path(args.out_dir) / "retrieval.csv";
  std::map<std::string, std::string> header{
      {"tool_version", mret::version()},
      {"model", fs::weakly_canonical(args.model_path).string()},
      {"threshold", mret::render_3dp(args.threshold)},
      {"window", window_text(window)},
      {"input_side", std::to_string(lm.model.arch.input_side)},
  };
  mret::write_retrieval_manifest(manifest_path, rows, header);

  const double fraction =
      rows.empty() ? 0.0 : static_cast<double>(retrieved) / static_cast<double>(rows.size());
  std::cout << "retrieved " << retrieved << " of " << rows.size() << " scans (fraction "
            << mret::render_3dp(fraction) << "), " << failed << " failed\n"
            << "manifest: " << manifest_path.string() << "\n";
  return failed == static_cast<int>(rows.size()) ? 1 : 0;
}

struct EvaluateArgs {
  std::string pred_path;
  std::string truth_path;
  std::string out_path;
  std::string roc_path;  // defaults next to the report
  double threshold = 0.5;
};

int run_evaluate(const EvaluateArgs& args) {
  const auto preds = mret::read_retrieval_manifest(args.pred_path);
  const auto truth = mret::read_corpus_manifest(args.truth_path);
  std::map<std::string, int> truth_labels;
  for (const auto& e : truth) {
    truth_labels[fs::weakly_canonical(e.path).string()] = e.label;
  }

  std::vector<double> scores;
  std::vector<int> labels;
  long long n_failed = 0;
  for (const auto& row : preds) {
    if (!row.ok) {
      ++n_failed;
      continue;
    }
    const std::string key = fs::weakly_canonical(row.path).string();
    const auto it = truth_labels.find(key);
    if (it == truth_labels.end()) {
      throw mret::JoinMismatch("prediction path not present in the truth manifest: " + key);
    }
    scores.push_back(row.score);
    labels.push_back(it->second);
  }
  if (scores.empty()) {
    throw mret::EmptyInput("no scored predictions to evaluate in " + args.pred_path);
  }

  mret::EvalReport report;
  report.threshold = args.threshold;
  report.cm = mret::confusion(scores, labels, args.threshold);
  report.metrics = mret::prf1(report.cm);
  report.curve = mret::roc(scores, labels);
  report.auc = mret::auc(report.curve);
  report.n_scored = static_cast<long long>(scores.size());
  report.n_failed = n_failed;

  const std::map<std::string, std::string> header{
      {"pred", fs::weakly_canonical(args.pred_path).string()},
      {"truth", fs::weakly_canonical(args.truth_path).string()},
      {"threshold", mret::render_3dp(args.threshold)},
  };
  mret::write_eval_report(args.out_path, report, header);
  const std::string roc_path =
      args.roc_path.empty() ? args.out_path + ".roc.csv" : args.roc_path;
  mret::write_roc_csv(roc_path, report.curve);

  std::cout << "n=" << report.n_scored << " (failed " << report.n_failed << ")  accuracy "
            << mret::render_3dp(report.metrics.accuracy) << "  precision "
            << mret::render_3dp(report.metrics.precision) << "  recall "
            << mret::render_3dp(report.metrics.recall) << "  f1 "
            << mret::render_3dp(report.metrics.f1) << "  auc "
            << mret::render_3dp(report.auc) << "\n"
            << "report: " << args.out_path << "\n"
            << "roc: " << roc_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-brain CT scan retrieval: montage reduction + residual-net scoring"};
  app.set_version_flag("--version", mret::version());
  app.require_subcommand(1);
  const int workers_default = default_workers();

  PhantomArgs phantom_args;
  CLI::App* phantom = app.add_subcommand("phantom", "Generate a labeled synthetic corpus");
  phantom->add_option("--out", phantom_args.out_dir, "Output directory")->required();
  phantom->add_option("--count", phantom_args.count, "Number of scans")
      ->required()
      ->check(CLI::PositiveNumber);
  phantom->add_option("--usable-fraction", phantom_args.usable_fraction,
                      "Fraction of whole-brain scans")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  phantom->add_option("--seed", phantom_args.seed, "Corpus seed")->capture_default_str();
  phantom->add_option("--split-ratios", phantom_args.split_ratios,
                      "Train/val/test ratios (largest-remainder rounding)")
      ->expected(3);
  phantom->add_option("--split-counts", phantom_args.split_counts,
                      "Exact train/val/test counts (overrides --split-ratios)")
      ->expected(3);
  phantom->add_option("--inplane", phantom_args.inplane, "Phantom x y size")->expected(2);
  phantom->add_option("--z-range", phantom_args.z_range, "Slice count range")->expected(2);

  MontageArgs montage_args;
  CLI::App* montage = app.add_subcommand("montage", "Reduce scans to 2D montages");
  montage->add_option("inputs", montage_args.inputs, "Scan files and/or directories")
      ->required();
  montage->add_option("--out", montage_args.out_dir, "Output directory")->required();
  montage->add_option("--window", montage_args.window_tokens,
                      "Intensity window: LO HI, or 'auto'")
      ->expected(1, 2);
  montage_args.workers = workers_default;
  montage->add_option("--workers", montage_args.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train the usability classifier");
  train->add_option("--train", train_args.train_manifest, "Training corpus manifest")
      ->required();
  train->add_option("--val", train_args.val_manifest, "Validation corpus manifest")
      ->required();
  train->add_option("--out", train_args.model_path, "Model file to write")->required();
  train->add_option("--history", train_args.history_path,
                    "History JSON path (default: <model>.history.json)");
  train->add_option("--train-split", train_args.train_split,
                    "Split column value for training rows")
      ->capture_default_str();
  train->add_option("--val-split", train_args.val_split,
                    "Split column value for validation rows")
      ->capture_default_str();
  train->add_option("--preset", train_args.preset, "Network preset")
      ->check(CLI::IsMember({"micro", "resnet50"}))
      ->capture_default_str();
  train->add_option("--input-side", train_args.input_side,
                    "Network input side (default: preset's)");
  train->add_option("--epochs", train_args.epochs, "Maximum epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--batch-size", train_args.batch_size, "Batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--lr", train_args.lr, "Learning rate")->capture_default_str();
  train->add_option("--class-weights", train_args.class_weights,
                    "Loss weights for classes 0 and 1")
      ->expected(2);
  train->add_option("--seed", train_args.seed, "Training seed")->capture_default_str();
  train->add_option("--window", train_args.window_tokens,
                    "Intensity window: LO HI, or 'auto'")
      ->expected(1, 2);
  train_args.workers = workers_default;
  train->add_option("--workers", train_args.workers, "Montage-building worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  RetrieveArgs retrieve_args;
  CLI::App* retrieve = app.add_subcommand("retrieve", "Score a directory of scans");
  retrieve->add_option("--model", retrieve_args.model_path, "Trained model file")
      ->required();
  retrieve->add_option("--in", retrieve_args.scan_dir, "Directory of scans")->required();
  retrieve->add_option("--out", retrieve_args.out_dir, "Output directory")->required();
  retrieve->add_option("--threshold", retrieve_args.threshold, "Usability decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  retrieve->add_option("--input-side", retrieve_args.input_side,
                       "Override the model's input side");
  CLI::Option* window_opt =
      retrieve->add_option("--window", retrieve_args.window_tokens,
                           "Intensity window (default: the model's training window)")
          ->expected(1, 2);
  retrieve_args.workers = workers_default;
  retrieve->add_option("--workers", retrieve_args.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  EvaluateArgs evaluate_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score predictions against truth");
  evaluate->add_option("--pred", evaluate_args.pred_path, "Retrieval manifest")->required();
  evaluate->add_option("--truth", evaluate_args.truth_path, "Corpus manifest")->required();
  evaluate->add_option("--out", evaluate_args.out_path, "Report JSON to write")->required();
  evaluate->add_option("--roc", evaluate_args.roc_path,
                       "ROC CSV path (default: <report>.roc.csv)");
  evaluate->add_option("--threshold", evaluate_args.threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  retrieve_args.window_given = window_opt->count() > 0;

  try {
    if (phantom->parsed()) return run_phantom(phantom_args);
    if (montage->parsed()) return run_montage(montage_args);
    if (train->parsed()) return run_train(train_args);
    if (retrieve->parsed()) return run_retrieve(retrieve_args);
    if (evaluate->parsed()) return run_evaluate(evaluate_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
