#include "mret/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mret/errors.hpp"
#include "mret/loss.hpp"
#include "mret/metrics.hpp"
#include "mret/rng.hpp"

namespace mret {

namespace {

void require_both_classes(const Dataset& set, const char* which) {
  if (set.images.empty()) throw EmptyInput(std::string(which) + " set is empty");
  if (set.images.size() != set.labels.size()) {
    throw LengthMismatch(std::string(which) + " set has " + std::to_string(set.images.size()) +
                         " images for " + std::to_string(set.labels.size()) + " labels");
  }
  bool has[2] = {false, false};
  for (int y : set.labels) {
    if (y != 0 && y != 1) throw InvalidSize("label must be 0 or 1, got " + std::to_string(y));
    has[y] = true;
  }
  if (!has[0] || !has[1]) {
    throw DegenerateData(std::string(which) + " set lacks one of the two classes");
  }
}

// Standardized copies of a dataset's images, flattened for fast batch builds.
std::vector<std::vector<float>> prepare_inputs(const Dataset& set, int input_side) {
  std::vector<std::vector<float>> out;
  out.reserve(set.images.size());
  for (const GrayImage& img : set.images) {
    if (img.width != input_side || img.height != input_side) {
      throw ShapeMismatch("dataset image is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + ", expected " +
                          std::to_string(input_side) + "x" + std::to_string(input_side));
    }
    out.push_back(standardize(img).pixels);
  }
  return out;
}

Tensor4 gather_batch(const std::vector<std::vector<float>>& inputs,
                     const std::vector<std::size_t>& order, std::size_t begin,
                     std::size_t end, int side) {
  Tensor4 batch(static_cast<int>(end - begin), 1, side, side);
  for (std::size_t s = begin; s < end; ++s) {
    const std::vector<float>& src = inputs[order[s]];
    double* dst = batch.sample(static_cast<int>(s - begin));
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  return batch;
}

// Class-1 softmax scores for a whole prepared set, computed in batches.
std::vector<double> score_set(const Model& model,
                              const std::vector<std::vector<float>>& inputs,
                              int batch_size, int side) {
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> scores(inputs.size(), 0.0);
  for (std::size_t begin = 0; begin < inputs.size(); begin += batch_size) {
    const std::size_t end = std::min(inputs.size(), begin + batch_size);
    const Tensor4 batch = gather_batch(inputs, order, begin, end, side);
    const Logits logits = forward(model, batch);
    for (std::size_t s = begin; s < end; ++s) {
      scores[s] = softmax2(logits[s - begin])[1];
    }
  }
  return scores;
}

}  // namespace

int select_best_epoch(const std::vector<EpochStats>& history) {
  if (history.empty()) return -1;
  int best = 0;
  for (int e = 1; e < static_cast<int>(history.size()); ++e) {
    const EpochStats& cand = history[e];
    const EpochStats& cur = history[best];
    if (cand.val_f1 > cur.val_f1 ||
        (cand.val_f1 == cur.val_f1 && cand.val_auc > cur.val_auc)) {
      best = e;
    }
  }
  return best;
}

GrayImage standardize(const GrayImage& img) {
  if (img.pixels.empty()) throw EmptyInput("cannot standardize an empty image");
  double sum = 0.0;
  for (float p : img.pixels) sum += p;
  const double mean = sum / static_cast<double>(img.pixels.size());
  double sq = 0.0;
  for (float p : img.pixels) {
    const double d = p - mean;
    sq += d * d;
  }
  const double stddev = std::sqrt(sq / static_cast<double>(img.pixels.size()));
  GrayImage out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(img.pixels.size());
  if (stddev < 1e-12) {
    std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
    return out;
  }
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = static_cast<float>((img.pixels[i] - mean) / stddev);
  }
  return out;
}

TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const NetArch& arch, const TrainConfig& cfg) {
  require_both_classes(train_set, "training");
  require_both_classes(val_set, "validation");
  if (cfg.max_epochs < 1) throw InvalidSize("max_epochs must be positive");
  if (cfg.batch_size < 1) throw InvalidSize("batch_size must be positive");

  const int side = arch.input_side;
  const std::vector<std::vector<float>> train_inputs = prepare_inputs(train_set, side);
  const std::vector<std::vector<float>> val_inputs = prepare_inputs(val_set, side);

  Model model = init_model(arch, cfg.seed);
  AdamState opt = AdamState::like(model.params);
  const AdamConfig adam_cfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps};
  Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f6368));

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.max_epochs));
  ParamStore best_params = model.params;
  double best_f1 = -1.0;
  double best_auc = -1.0;

  std::vector<std::size_t> order(train_inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_weighted_sum = 0.0;
    double weight_total = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const Tensor4 batch = gather_batch(train_inputs, order, begin, end, side);
      std::vector<int> labels(end - begin);
      double batch_weight = 0.0;
      for (std::size_t s = begin; s < end; ++s) {
        labels[s - begin] = train_set.labels[order[s]];
        batch_weight += cfg.class_weights[static_cast<std::size_t>(labels[s - begin])];
      }
      Tape tape;
      const Logits logits = forward(model, batch, &tape);
      Logits dlogits;
      const double batch_loss = weighted_ce(logits, labels, cfg.class_weights, &dlogits);
      const ParamStore grads = backward(model, tape, dlogits);
      adam_step(opt, grads, model.params, adam_cfg);
      loss_weighted_sum += batch_loss * batch_weight;
      weight_total += batch_weight;
    }

    EpochStats stats;
    stats.train_loss = loss_weighted_sum / weight_total;
    const std::vector<double> val_scores = score_set(model, val_inputs, cfg.batch_size, side);
    const ConfusionMatrix cm = confusion(val_scores, val_set.labels, 0.5);
    const Prf1 p = prf1(cm);
    stats.val_accuracy = p.accuracy;
    stats.val_precision = p.precision;
    stats.val_recall = p.recall;
    stats.val_f1 = p.f1;
    stats.val_auc = auc_score(val_scores, val_set.labels);
    result.history.push_back(stats);

    if (stats.val_f1 > best_f1 || (stats.val_f1 == best_f1 && stats.val_auc > best_auc)) {
      best_f1 = stats.val_f1;
      best_auc = stats.val_auc;
      best_params = model.params;
    }
  }

  result.selected_epoch = select_best_epoch(result.history);
  result.model = std::move(model);
  result.model.params = std::move(best_params);
  result.model.selected_epoch = result.selected_epoch;
  return result;
}

double predict(const Model& model, const GrayImage& montage) {
  return predict_prepared(model, resize_to_side(montage, model.arch.input_side));
}

double predict_prepared(const Model& model, const GrayImage& input_side_image) {
  const int side = model.arch.input_side;
  if (input_side_image.width != side || input_side_image.height != side) {
    throw ShapeMismatch("expected a " + std::to_string(side) + "x" + std::to_string(side) +
                        " image, got " + std::to_string(input_side_image.width) + "x" +
                        std::to_string(input_side_image.height));
  }
  const GrayImage prepared = standardize(input_side_image);
  Tensor4 batch(1, 1, side, side);
  for (std::size_t i = 0; i < prepared.pixels.size(); ++i) batch.v[i] = prepared.pixels[i];
  const Logits logits = forward(model, batch);
  return softmax2(logits[0])[1];
}

}  // namespace mret
