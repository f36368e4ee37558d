#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mret/adam.hpp"
#include "mret/image.hpp"
#include "mret/net.hpp"

namespace mret {

struct TrainConfig {
  int max_epochs = 100;
  int batch_size = 8;
  double learning_rate = 1e-4;
  std::array<double, 2> class_weights{1.0, 10.0};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Images at the network input side, not yet standardized; labels in {0,1}.
struct Dataset {
  std::vector<GrayImage> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

struct EpochStats {
  double train_loss = 0.0;  // weighted-mean loss over the epoch
  double val_accuracy = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double val_f1 = 0.0;
  double val_auc = 0.0;
};

struct TrainResult {
  Model model;                     // parameters from the selected epoch
  std::vector<EpochStats> history;
  int selected_epoch = -1;         // 0-based index into history
};

/// Best validation epoch: highest F1, ties broken by AUC, then earliest.
/// Returns -1 for an empty history.
int select_best_epoch(const std::vector<EpochStats>& history);

/// Zero mean, unit variance over the image's pixels (constant images map to
/// zero). Applied to every network input.
GrayImage standardize(const GrayImage& img);

/// Single-threaded deterministic training: seeded shuffling per epoch, Adam
/// updates, per-epoch validation, best-epoch parameter selection. The last
/// partial batch is kept. Throws DegenerateData when either set lacks a class.
TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const NetArch& arch, const TrainConfig& cfg);

/// Usability score: softmax(logits)[1] for a 512x512 (or input-side) montage;
/// resizes and standardizes internally.
double predict(const Model& model, const GrayImage& montage);

/// Scores a prepared (input-side, unstandardized) image.
double predict_prepared(const Model& model, const GrayImage& input_side_image);

}  // namespace mret
