#include "mret/net.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "doctest.h"
#include "mret/errors.hpp"
#include "mret/loss.hpp"
#include "mret/rng.hpp"

using namespace mret;

namespace {

// Hand-built two-block net, small enough to finite-difference exhaustively.
NetArch tiny_basic_arch() {
  NetArch arch;
  arch.preset = "tiny-basic";
  arch.input_side = 6;
  arch.stem = {1, 3, 3, 1, 1};
  BlockSpec block;
  block.kind = BlockKind::Basic;
  block.conv1 = {3, 4, 3, 2, 1};
  block.conv2 = {4, 4, 3, 1, 1};
  block.has_proj = true;
  block.proj = {3, 4, 1, 2, 0};
  arch.blocks = {block};
  arch.feature_ch = 4;
  return arch;
}

// Strided stem + max pool + one bottleneck block: every layer kind in one net.
NetArch tiny_bottleneck_arch() {
  NetArch arch;
  arch.preset = "tiny-bottleneck";
  arch.input_side = 12;
  arch.stem = {1, 4, 3, 2, 1};
  arch.stem_maxpool = true;
  BlockSpec block;
  block.kind = BlockKind::Bottleneck;
  block.conv1 = {4, 2, 1, 1, 0};
  block.conv2 = {2, 2, 3, 2, 1};
  block.conv3 = {2, 8, 1, 1, 0};
  block.has_proj = true;
  block.proj = {4, 8, 1, 2, 0};
  arch.blocks = {block};
  arch.feature_ch = 8;
  return arch;
}

Tensor4 random_batch(int n, int side, std::uint64_t seed) {
  Tensor4 x(n, 1, side, side);
  Rng rng(seed);
  for (double& v : x.v) v = rng.uniform(-2.0, 2.0);
  return x;
}

double batch_loss(const Model& model, const Tensor4& x, const std::vector<int>& labels) {
  const Logits logits = forward(model, x);
  return weighted_ce(logits, labels, {1.0, 10.0});
}

// Central-difference check of every scalar parameter against backward().
void gradcheck(const NetArch& arch, double* worst_out = nullptr) {
  Model model = init_model(arch, 321);
  const Tensor4 x = random_batch(3, arch.input_side, 654);
  const std::vector<int> labels = {1, 0, 1};

  Tape tape;
  const Logits logits = forward(model, x, &tape);
  Logits dlogits;
  weighted_ce(logits, labels, {1.0, 10.0}, &dlogits);
  const ParamStore grads = backward(model, tape, dlogits);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t ai = 0; ai < model.params.arrays.size(); ++ai) {
    ParamArray& array = model.params.arrays[ai];
    for (std::size_t k = 0; k < array.v.size(); ++k) {
      const double saved = array.v[k];
      array.v[k] = saved + h;
      const double up = batch_loss(model, x, labels);
      array.v[k] = saved - h;
      const double down = batch_loss(model, x, labels);
      array.v[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads.arrays[ai].v[k];
      const double rel = std::abs(analytic - numeric) /
                         std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
      worst = std::max(worst, rel);
    }
  }
  if (worst_out) *worst_out = worst;
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("micro topology and parameter count") {
  const NetArch arch = NetArch::micro(128);
  CHECK(arch.preset == "micro");
  CHECK(arch.input_side == 128);
  CHECK(arch.classes == 2);
  CHECK_FALSE(arch.stem_maxpool);
  CHECK(arch.stem.in_ch == 1);
  CHECK(arch.stem.out_ch == 8);
  CHECK(arch.stem.kernel == 3);
  CHECK(arch.stem.stride == 1);
  CHECK(arch.feature_ch == 32);

  REQUIRE(arch.blocks.size() == 6);
  const int widths[6] = {8, 8, 16, 16, 32, 32};
  for (int i = 0; i < 6; ++i) {
    CAPTURE(i);
    CHECK(arch.blocks[i].kind == BlockKind::Basic);
    CHECK(arch.blocks[i].out_ch() == widths[i]);
    const bool entry = (i % 2) == 0;
    CHECK(arch.blocks[i].conv1.stride == (entry ? 2 : 1));
    CHECK(arch.blocks[i].has_proj == entry);
  }

  // Summed by hand, layer by layer:
  //   stem 3x3x1 -> 8:              8*9 + 8            =    80
  //   block0 (8 -> 8, /2, proj):    584 + 584 + 72     =  1240
  //   block1 (8 -> 8):              584 + 584          =  1168
  //   block2 (8 -> 16, /2, proj):   1168 + 2320 + 144  =  3632
  //   block3 (16 -> 16):            2320 + 2320        =  4640
  //   block4 (16 -> 32, /2, proj):  4640 + 9248 + 544  = 14432
  //   block5 (32 -> 32):            9248 + 9248        = 18496
  //   head 32 -> 2:                 64 + 2             =    66
  CHECK(param_count(arch) == 80 + 1240 + 1168 + 3632 + 4640 + 14432 + 18496 + 66);
  CHECK(param_count(arch) == 43754);
  CHECK(param_layout(arch).total_size() == param_count(arch));
  CHECK(init_model(arch, 1).params.total_size() == param_count(arch));
}

TEST_CASE("micro parameter arrays follow the canonical naming") {
  const ParamStore layout = param_layout(NetArch::micro(128));
  REQUIRE(layout.arrays.size() == 2 + 6 * 4 + 3 * 2 + 2);  // stem + convs + projs + head
  CHECK(layout.arrays[0].name == "stem.w");
  CHECK(layout.arrays[0].shape == std::vector<int>{8, 1, 3, 3});
  CHECK(layout.arrays[1].name == "stem.b");
  CHECK(layout.arrays[2].name == "block0.conv1.w");
  const ParamArray* proj = layout.find("block2.proj.w");
  REQUIRE(proj != nullptr);
  CHECK(proj->shape == std::vector<int>{16, 8, 1, 1});
  const ParamArray* head = layout.find("head.w");
  REQUIRE(head != nullptr);
  CHECK(head->shape == std::vector<int>{2, 32});
  CHECK(layout.arrays.back().name == "head.b");
  CHECK(layout.find("block1.proj.w") == nullptr);  // non-entry block, identity skip
}

TEST_CASE("reference 50-layer topology") {
  const NetArch arch = NetArch::resnet50(512);
  CHECK(arch.stem.kernel == 7);
  CHECK(arch.stem.out_ch == 64);
  CHECK(arch.stem.stride == 2);
  CHECK(arch.stem.pad == 3);
  CHECK(arch.stem_maxpool);
  REQUIRE(arch.blocks.size() == 3 + 4 + 6 + 3);
  CHECK(arch.blocks[0].kind == BlockKind::Bottleneck);
  CHECK(arch.blocks[0].conv2.stride == 1);   // stage 0 enters at full stride
  CHECK(arch.blocks[0].has_proj);            // but still widens 64 -> 256
  CHECK(arch.blocks[3].conv2.stride == 2);   // stage 1 entry downsamples
  CHECK(arch.blocks[0].out_ch() == 256);
  CHECK(arch.blocks.back().out_ch() == 2048);
  CHECK(arch.feature_ch == 2048);
  CHECK(param_count(arch) == param_layout(arch).total_size());
  CHECK(param_count(arch) > 20'000'000);  // full-size network, not a toy
}

TEST_CASE("preset lookup") {
  CHECK(NetArch::by_preset("micro").input_side == 128);
  CHECK(NetArch::by_preset("micro", 64).input_side == 64);
  CHECK(NetArch::by_preset("resnet50").input_side == 512);
  CHECK_THROWS_AS(NetArch::by_preset("vgg"), InvalidDescriptor);
  CHECK_THROWS_AS(NetArch::micro(4), InvalidSize);
  CHECK_THROWS_AS(NetArch::resnet50(16), InvalidSize);
}

TEST_CASE("initialization is seeded, bounded, and bias-free") {
  const NetArch arch = NetArch::micro(32);
  const Model a = init_model(arch, 5);
  const Model b = init_model(arch, 5);
  const Model c = init_model(arch, 6);

  bool any_diff = false;
  for (std::size_t ai = 0; ai < a.params.arrays.size(); ++ai) {
    const ParamArray& arr = a.params.arrays[ai];
    CHECK(arr.v == b.params.arrays[ai].v);
    if (arr.v != c.params.arrays[ai].v) any_diff = true;
    if (arr.name.ends_with(".b")) {
      for (double v : arr.v) CHECK(v == 0.0);
    } else {
      int fan_in = 1;
      for (std::size_t d = 1; d < arr.shape.size(); ++d) fan_in *= arr.shape[d];
      const double bound = std::sqrt(1.0 / fan_in);
      for (double v : arr.v) {
        CHECK(std::abs(v) <= bound);
      }
    }
  }
  CHECK(any_diff);
  CHECK(a.init_seed == 5);
}

TEST_CASE("forward pools and projects exactly on a hand oracle") {
  // Stem-only net: all-ones 3x3 conv over an all-ones 3x3 image sums its
  // 9/6/4-point neighborhoods; the head then scales the global average.
  NetArch arch;
  arch.preset = "oracle";
  arch.input_side = 3;
  arch.stem = {1, 1, 3, 1, 1};
  arch.feature_ch = 1;

  Model model;
  model.arch = arch;
  model.params = param_layout(arch);
  for (double& v : model.params.find("stem.w")->v) v = 1.0;
  model.params.find("head.w")->v = {1.0, 2.0};
  model.params.find("head.b")->v = {0.5, 0.0};

  Tensor4 x(1, 1, 3, 3);
  for (double& v : x.v) v = 1.0;

  const Logits logits = forward(model, x);
  REQUIRE(logits.size() == 1);
  // corners 4, edges 6, center 9 -> mean (4*4 + 4*6 + 9) / 9 = 49/9
  CHECK(logits[0][0] == doctest::Approx(49.0 / 9.0 + 0.5).epsilon(1e-15));
  CHECK(logits[0][1] == doctest::Approx(98.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("forward validates input shape") {
  const Model model = init_model(NetArch::micro(32), 9);
  CHECK_THROWS_AS(forward(model, Tensor4(1, 1, 16, 16)), ShapeMismatch);
  CHECK_THROWS_AS(forward(model, Tensor4(1, 3, 32, 32)), ShapeMismatch);
  CHECK_THROWS_AS(forward(model, Tensor4(0, 1, 32, 32)), ShapeMismatch);
}

TEST_CASE("forward is deterministic") {
  const Model model = init_model(NetArch::micro(32), 11);
  const Tensor4 x = random_batch(2, 32, 77);
  const Logits a = forward(model, x);
  const Logits b = forward(model, x);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i][0] == b[i][0]);
    CHECK(a[i][1] == b[i][1]);
  }
}

TEST_CASE("analytic gradients match central differences") {
  SUBCASE("basic block net") { gradcheck(tiny_basic_arch()); }
  SUBCASE("bottleneck net with strided stem and max pool") {
    gradcheck(tiny_bottleneck_arch());
  }
}

TEST_CASE("batch gradients are the sum of per-sample gradients") {
  const NetArch arch = tiny_basic_arch();
  const Model model = init_model(arch, 13);
  const Tensor4 batch = random_batch(2, arch.input_side, 31);
  const std::vector<int> labels = {1, 0};

  // Unweighted sum-loss per sample (weights 1/1 make the mean a plain mean,
  // so scale by sample count to compare sums).
  Tape tape;
  Logits dl;
  const Logits lg = forward(model, batch, &tape);
  weighted_ce(lg, labels, {1.0, 1.0}, &dl);
  for (auto& d : dl) { d[0] *= 2.0; d[1] *= 2.0; }
  const ParamStore whole = backward(model, tape, dl);

  ParamStore acc = model.params.zeros_like();
  for (int s = 0; s < 2; ++s) {
    Tensor4 one(1, 1, arch.input_side, arch.input_side);
    for (int ih = 0; ih < one.h; ++ih)
      for (int iw = 0; iw < one.w; ++iw)
        one.at(0, 0, ih, iw) = batch.at(s, 0, ih, iw);
    Tape t1;
    Logits d1;
    const Logits l1 = forward(model, one, &t1);
    weighted_ce(l1, {labels[s]}, {1.0, 1.0}, &d1);
    const ParamStore g1 = backward(model, t1, d1);
    for (std::size_t ai = 0; ai < acc.arrays.size(); ++ai)
      for (std::size_t k = 0; k < acc.arrays[ai].v.size(); ++k)
        acc.arrays[ai].v[k] += g1.arrays[ai].v[k];
  }

  for (std::size_t ai = 0; ai < whole.arrays.size(); ++ai) {
    for (std::size_t k = 0; k < whole.arrays[ai].v.size(); ++k) {
      CHECK(whole.arrays[ai].v[k] ==
            doctest::Approx(acc.arrays[ai].v[k]).epsilon(1e-9));
    }
  }
}
