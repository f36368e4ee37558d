#include "mret/net.hpp"

#include <Eigen/Dense>

#include "mret/errors.hpp"
#include "mret/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace mret {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Unrolls one sample of `x` into a (C*k*k) x (oh*ow) matrix so the convolution
// becomes a single matrix product against the (O x C*k*k) weight matrix.
void im2col(const double* x, int channels, int h, int w, const ConvSpec& spec,
            int oh, int ow, RowMat& col) {
  const int k = spec.kernel;
  col.resize(channels * k * k, oh * ow);
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * spec.stride - spec.pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + static_cast<std::size_t>(oy) * ow,
                      row + static_cast<std::size_t>(oy + 1) * ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * spec.stride - spec.pad + kx;
            row[static_cast<std::size_t>(oy) * ow + ox] =
                (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of the column-space gradient back onto the input sample;
// exact adjoint of im2col.
void col2im_add(const RowMat& dcol, int channels, int h, int w, const ConvSpec& spec,
                int oh, int ow, double* dx) {
  const int k = spec.kernel;
  for (int c = 0; c < channels; ++c) {
    double* plane = dx + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = dcol.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * spec.stride - spec.pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * spec.stride - spec.pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += row[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
}

Tensor4 conv_forward(const Tensor4& x, const ConvSpec& spec,
                     const std::vector<double>& weight, const std::vector<double>& bias) {
  if (x.c != spec.in_ch) {
    throw ShapeMismatch("conv expects " + std::to_string(spec.in_ch) + " channels, got " +
                        std::to_string(x.c));
  }
  const int oh = conv_out_extent(x.h, spec.kernel, spec.stride, spec.pad);
  const int ow = conv_out_extent(x.w, spec.kernel, spec.stride, spec.pad);
  Tensor4 y(x.n, spec.out_ch, oh, ow);
  const int kdim = spec.in_ch * spec.kernel * spec.kernel;
  Eigen::Map<const RowMat> wmat(weight.data(), spec.out_ch, kdim);
  Eigen::Map<const Eigen::VectorXd> bvec(bias.data(), spec.out_ch);
  RowMat col;
  for (int n = 0; n < x.n; ++n) {
    im2col(x.sample(n), x.c, x.h, x.w, spec, oh, ow, col);
    Eigen::Map<RowMat> ymat(y.sample(n), spec.out_ch, oh * ow);
    ymat.noalias() = wmat * col;
    ymat.colwise() += bvec;
  }
  return y;
}

// Accumulates weight/bias gradients into the given arrays and, when `dx` is
// non-null, produces the input gradient (the first layer never needs one).
void conv_backward_full(const Tensor4& x, const Tensor4& dy, const ConvSpec& spec,
                        const std::vector<double>& weight,
                        std::vector<double>& dweight, std::vector<double>& dbias,
                        Tensor4* dx) {
  const int oh = dy.h;
  const int ow = dy.w;
  const int kdim = spec.in_ch * spec.kernel * spec.kernel;
  Eigen::Map<const RowMat> wmat(weight.data(), spec.out_ch, kdim);
  Eigen::Map<RowMat> dwmat(dweight.data(), spec.out_ch, kdim);
  Eigen::Map<Eigen::VectorXd> dbvec(dbias.data(), spec.out_ch);
  RowMat col;
  RowMat dcol;
  if (dx != nullptr) *dx = Tensor4(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    im2col(x.sample(n), x.c, x.h, x.w, spec, oh, ow, col);
    Eigen::Map<const RowMat> dymat(dy.sample(n), spec.out_ch, oh * ow);
    dwmat.noalias() += dymat * col.transpose();
    dbvec += dymat.rowwise().sum();
    if (dx != nullptr) {
      dcol.noalias() = wmat.transpose() * dymat;
      col2im_add(dcol, x.c, x.h, x.w, spec, oh, ow, dx->sample(n));
    }
  }
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  return y;
}

// dy masked by the sign of the pre-activation (gradient 0 at exactly 0).
void relu_backward_inplace(Tensor4& dy, const Tensor4& pre) {
  for (std::size_t i = 0; i < dy.v.size(); ++i) {
    if (pre.v[i] <= 0.0) dy.v[i] = 0.0;
  }
}

// 3x3 stride-2 max pool with single-pixel padding; records the flat index of
// the winning input pixel (first occurrence on ties) for the backward pass.
Tensor4 maxpool_3x3_s2(const Tensor4& x, std::vector<std::int32_t>& argmax) {
  const int oh = conv_out_extent(x.h, 3, 2, 1);
  const int ow = conv_out_extent(x.w, 3, 2, 1);
  Tensor4 y(x.n, x.c, oh, ow);
  argmax.assign(y.v.size(), 0);
  std::size_t out_idx = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      const double* plane = x.sample(n) + static_cast<std::size_t>(c) * x.h * x.w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++out_idx) {
          double best = -std::numeric_limits<double>::infinity();
          std::int32_t best_at = 0;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy * 2 - 1 + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox * 2 - 1 + kx;
              if (ix < 0 || ix >= x.w) continue;
              const double v = plane[static_cast<std::size_t>(iy) * x.w + ix];
              if (v > best) {
                best = v;
                best_at = static_cast<std::int32_t>(iy * x.w + ix);
              }
            }
          }
          y.v[out_idx] = best;
          argmax[out_idx] = best_at;
        }
      }
    }
  }
  return y;
}

Tensor4 maxpool_backward(const Tensor4& dy, const std::vector<std::int32_t>& argmax,
                         int in_h, int in_w) {
  Tensor4 dx(dy.n, dy.c, in_h, in_w);
  std::size_t out_idx = 0;
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < dy.c; ++c) {
      double* plane = dx.sample(n) + static_cast<std::size_t>(c) * in_h * in_w;
      const std::size_t plane_elems = static_cast<std::size_t>(dy.h) * dy.w;
      for (std::size_t i = 0; i < plane_elems; ++i, ++out_idx) {
        plane[argmax[out_idx]] += dy.v[out_idx];
      }
    }
  }
  return dx;
}

std::string block_prefix(int index) {
  return "block" + std::to_string(index);
}

void push_conv_arrays(ParamStore& store, const std::string& prefix, const ConvSpec& spec) {
  ParamArray w;
  w.name = prefix + ".w";
  w.shape = {spec.out_ch, spec.in_ch, spec.kernel, spec.kernel};
  w.v.assign(static_cast<std::size_t>(spec.out_ch) * spec.in_ch * spec.kernel * spec.kernel, 0.0);
  store.arrays.push_back(std::move(w));
  ParamArray b;
  b.name = prefix + ".b";
  b.shape = {spec.out_ch};
  b.v.assign(static_cast<std::size_t>(spec.out_ch), 0.0);
  store.arrays.push_back(std::move(b));
}

int fan_in_of(const ParamArray& weight) {
  int fan = 1;
  for (std::size_t i = 1; i < weight.shape.size(); ++i) fan *= weight.shape[i];
  return fan;
}

BlockSpec basic_block(int in_ch, int out_ch, int stride) {
  BlockSpec block;
  block.kind = BlockKind::Basic;
  block.conv1 = {in_ch, out_ch, 3, stride, 1};
  block.conv2 = {out_ch, out_ch, 3, 1, 1};
  block.has_proj = stride != 1 || in_ch != out_ch;
  if (block.has_proj) block.proj = {in_ch, out_ch, 1, stride, 0};
  return block;
}

BlockSpec bottleneck_block(int in_ch, int width, int stride) {
  BlockSpec block;
  block.kind = BlockKind::Bottleneck;
  const int out_ch = width * 4;
  block.conv1 = {in_ch, width, 1, 1, 0};
  block.conv2 = {width, width, 3, stride, 1};
  block.conv3 = {width, out_ch, 1, 1, 0};
  block.has_proj = stride != 1 || in_ch != out_ch;
  if (block.has_proj) block.proj = {in_ch, out_ch, 1, stride, 0};
  return block;
}

}  // namespace

std::size_t ParamStore::total_size() const {
  std::size_t total = 0;
  for (const ParamArray& array : arrays) total += array.v.size();
  return total;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  out.arrays.reserve(arrays.size());
  for (const ParamArray& array : arrays) {
    ParamArray z;
    z.name = array.name;
    z.shape = array.shape;
    z.v.assign(array.v.size(), 0.0);
    out.arrays.push_back(std::move(z));
  }
  return out;
}

ParamArray* ParamStore::find(const std::string& name) {
  for (ParamArray& array : arrays) {
    if (array.name == name) return &array;
  }
  return nullptr;
}

const ParamArray* ParamStore::find(const std::string& name) const {
  for (const ParamArray& array : arrays) {
    if (array.name == name) return &array;
  }
  return nullptr;
}

ParamStore param_layout(const NetArch& arch) {
  ParamStore store;
  push_conv_arrays(store, "stem", arch.stem);
  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    const BlockSpec& block = arch.blocks[i];
    const std::string prefix = block_prefix(static_cast<int>(i));
    push_conv_arrays(store, prefix + ".conv1", block.conv1);
    push_conv_arrays(store, prefix + ".conv2", block.conv2);
    if (block.kind == BlockKind::Bottleneck) {
      push_conv_arrays(store, prefix + ".conv3", block.conv3);
    }
    if (block.has_proj) {
      push_conv_arrays(store, prefix + ".proj", block.proj);
    }
  }
  ParamArray hw;
  hw.name = "head.w";
  hw.shape = {arch.classes, arch.feature_ch};
  hw.v.assign(static_cast<std::size_t>(arch.classes) * arch.feature_ch, 0.0);
  store.arrays.push_back(std::move(hw));
  ParamArray hb;
  hb.name = "head.b";
  hb.shape = {arch.classes};
  hb.v.assign(static_cast<std::size_t>(arch.classes), 0.0);
  store.arrays.push_back(std::move(hb));
  return store;
}

NetArch NetArch::micro(int input_side) {
  if (input_side < 8) {
    throw InvalidSize("micro preset needs an input side of at least 8, got " +
                      std::to_string(input_side));
  }
  NetArch arch;
  arch.preset = "micro";
  arch.input_side = input_side;
  arch.stem = {1, 8, 3, 1, 1};
  arch.stem_maxpool = false;
  const int widths[3] = {8, 16, 32};
  int in_ch = 8;
  for (int stage = 0; stage < 3; ++stage) {
    arch.blocks.push_back(basic_block(in_ch, widths[stage], 2));
    arch.blocks.push_back(basic_block(widths[stage], widths[stage], 1));
    in_ch = widths[stage];
  }
  arch.feature_ch = in_ch;
  return arch;
}

NetArch NetArch::resnet50(int input_side) {
  if (input_side < 32) {
    throw InvalidSize("resnet50 preset needs an input side of at least 32, got " +
                      std::to_string(input_side));
  }
  NetArch arch;
  arch.preset = "resnet50";
  arch.input_side = input_side;
  arch.stem = {1, 64, 7, 2, 3};
  arch.stem_maxpool = true;
  const int stage_blocks[4] = {3, 4, 6, 3};
  const int stage_widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int width = stage_widths[stage];
    const int entry_stride = stage == 0 ? 1 : 2;
    arch.blocks.push_back(bottleneck_block(in_ch, width, entry_stride));
    in_ch = width * 4;
    for (int b = 1; b < stage_blocks[stage]; ++b) {
      arch.blocks.push_back(bottleneck_block(in_ch, width, 1));
    }
  }
  arch.feature_ch = in_ch;
  return arch;
}

NetArch NetArch::by_preset(const std::string& name, std::optional<int> input_side) {
  if (name == "micro") return micro(input_side.value_or(128));
  if (name == "resnet50") return resnet50(input_side.value_or(512));
  throw InvalidDescriptor("unknown network preset '" + name + "'");
}

std::size_t param_count(const NetArch& arch) {
  auto conv_params = [](const ConvSpec& spec) {
    return static_cast<std::size_t>(spec.out_ch) * spec.in_ch * spec.kernel * spec.kernel +
           spec.out_ch;
  };
  std::size_t total = conv_params(arch.stem);
  for (const BlockSpec& block : arch.blocks) {
    total += conv_params(block.conv1) + conv_params(block.conv2);
    if (block.kind == BlockKind::Bottleneck) total += conv_params(block.conv3);
    if (block.has_proj) total += conv_params(block.proj);
  }
  total += static_cast<std::size_t>(arch.classes) * arch.feature_ch + arch.classes;
  return total;
}

Model init_model(const NetArch& arch, std::uint64_t seed) {
  Model model;
  model.arch = arch;
  model.init_seed = seed;
  model.params = param_layout(arch);
  Rng rng(mix_seed(seed, 0x696e6974));
  for (ParamArray& array : model.params.arrays) {
    if (array.shape.size() == 1) continue;  // biases start at zero
    const double bound = std::sqrt(1.0 / fan_in_of(array));
    for (double& v : array.v) v = rng.uniform(-bound, bound);
  }
  return model;
}

Logits forward(const Model& model, const Tensor4& batch, Tape* tape) {
  const NetArch& arch = model.arch;
  if (batch.n < 1 || batch.c != arch.stem.in_ch || batch.h != arch.input_side ||
      batch.w != arch.input_side) {
    throw ShapeMismatch("network expects " + std::to_string(arch.stem.in_ch) + "x" +
                        std::to_string(arch.input_side) + "x" + std::to_string(arch.input_side) +
                        " input, got " + std::to_string(batch.c) + "x" +
                        std::to_string(batch.h) + "x" + std::to_string(batch.w));
  }
  const std::vector<ParamArray>& arrays = model.params.arrays;
  std::size_t cursor = 0;
  auto next_pair = [&]() {
    const std::vector<double>& w = arrays[cursor].v;
    const std::vector<double>& b = arrays[cursor + 1].v;
    cursor += 2;
    return std::pair<const std::vector<double>*, const std::vector<double>*>{&w, &b};
  };

  auto [stem_w, stem_b] = next_pair();
  Tensor4 pre = conv_forward(batch, arch.stem, *stem_w, *stem_b);
  Tensor4 cur = relu(pre);
  std::vector<std::int32_t> argmax;
  if (arch.stem_maxpool) cur = maxpool_3x3_s2(cur, argmax);
  if (tape != nullptr) {
    tape->input = batch;
    tape->stem_pre = std::move(pre);
    tape->stem_out = cur;
    tape->pool_argmax = std::move(argmax);
    tape->blocks.clear();
    tape->blocks.resize(arch.blocks.size());
  }

  for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
    const BlockSpec& block = arch.blocks[i];
    auto [w1, b1] = next_pair();
    Tensor4 a1 = conv_forward(cur, block.conv1, *w1, *b1);
    Tensor4 r1 = relu(a1);
    auto [w2, b2] = next_pair();
    Tensor4 a2 = conv_forward(r1, block.conv2, *w2, *b2);
    Tensor4 main;
    Tensor4 a2_saved;
    if (block.kind == BlockKind::Bottleneck) {
      Tensor4 r2 = relu(a2);
      auto [w3, b3] = next_pair();
      main = conv_forward(r2, block.conv3, *w3, *b3);
      a2_saved = std::move(a2);
    } else {
      main = std::move(a2);
    }
    Tensor4 skip;
    if (block.has_proj) {
      auto [wp, bp] = next_pair();
      skip = conv_forward(cur, block.proj, *wp, *bp);
    } else {
      skip = cur;
    }
    if (!main.same_shape(skip)) {
      throw ShapeMismatch("residual branches disagree in block " + std::to_string(i));
    }
    Tensor4 sum = std::move(main);
    for (std::size_t j = 0; j < sum.v.size(); ++j) sum.v[j] += skip.v[j];
    Tensor4 out = relu(sum);
    if (tape != nullptr) {
      Tape::BlockTape& bt = tape->blocks[i];
      bt.a1 = std::move(a1);
      if (block.kind == BlockKind::Bottleneck) bt.a2 = std::move(a2_saved);
      bt.sum_pre = std::move(sum);
      bt.out = out;
    }
    cur = std::move(out);
  }

  // Global average pool down to one value per channel, then the linear head.
  const int spatial = cur.h * cur.w;
  std::vector<double> pooled(static_cast<std::size_t>(cur.n) * arch.feature_ch, 0.0);
  for (int n = 0; n < cur.n; ++n) {
    const double* sample = cur.sample(n);
    for (int c = 0; c < cur.c; ++c) {
      double acc = 0.0;
      const double* plane = sample + static_cast<std::size_t>(c) * spatial;
      for (int s = 0; s < spatial; ++s) acc += plane[s];
      pooled[static_cast<std::size_t>(n) * arch.feature_ch + c] = acc / spatial;
    }
  }

  auto [head_w, head_b] = next_pair();
  Logits logits(static_cast<std::size_t>(batch.n));
  for (int n = 0; n < batch.n; ++n) {
    const double* feat = pooled.data() + static_cast<std::size_t>(n) * arch.feature_ch;
    for (int j = 0; j < arch.classes; ++j) {
      double acc = (*head_b)[j];
      const double* wrow = head_w->data() + static_cast<std::size_t>(j) * arch.feature_ch;
      for (int c = 0; c < arch.feature_ch; ++c) acc += wrow[c] * feat[c];
      logits[n][j] = acc;
    }
  }
  if (tape != nullptr) tape->pooled = std::move(pooled);
  return logits;
}

ParamStore backward(const Model& model, const Tape& tape, const Logits& dlogits) {
  const NetArch& arch = model.arch;
  if (dlogits.size() != static_cast<std::size_t>(tape.input.n)) {
    throw ShapeMismatch("logit gradient batch does not match the taped forward pass");
  }
  ParamStore grads = model.params.zeros_like();
  const std::vector<ParamArray>& arrays = model.params.arrays;

  // Walk the parameter arrays from the back: head first, then blocks in
  // reverse, then the stem.
  std::size_t cursor = arrays.size();
  auto prev_pair = [&]() {
    cursor -= 2;
    return cursor;
  };

  const std::size_t head_at = prev_pair();
  const std::vector<double>& head_w = arrays[head_at].v;
  const int batch_n = tape.input.n;
  const Tensor4& last = tape.blocks.empty() ? tape.stem_out : tape.blocks.back().out;
  const int spatial = last.h * last.w;

  std::vector<double>& dhead_w = grads.arrays[head_at].v;
  std::vector<double>& dhead_b = grads.arrays[head_at + 1].v;
  std::vector<double> dpooled(static_cast<std::size_t>(batch_n) * arch.feature_ch, 0.0);
  for (int n = 0; n < batch_n; ++n) {
    const double* feat = tape.pooled.data() + static_cast<std::size_t>(n) * arch.feature_ch;
    for (int j = 0; j < arch.classes; ++j) {
      const double g = dlogits[n][j];
      dhead_b[j] += g;
      double* dwrow = dhead_w.data() + static_cast<std::size_t>(j) * arch.feature_ch;
      const double* wrow = head_w.data() + static_cast<std::size_t>(j) * arch.feature_ch;
      double* dfeat = dpooled.data() + static_cast<std::size_t>(n) * arch.feature_ch;
      for (int c = 0; c < arch.feature_ch; ++c) {
        dwrow[c] += g * feat[c];
        dfeat[c] += g * wrow[c];
      }
    }
  }

  // Average pool spreads each channel gradient uniformly over the plane.
  Tensor4 dcur(last.n, last.c, last.h, last.w);
  for (int n = 0; n < batch_n; ++n) {
    double* sample = dcur.sample(n);
    for (int c = 0; c < last.c; ++c) {
      const double g = dpooled[static_cast<std::size_t>(n) * arch.feature_ch + c] / spatial;
      double* plane = sample + static_cast<std::size_t>(c) * spatial;
      for (int s = 0; s < spatial; ++s) plane[s] = g;
    }
  }

  for (std::size_t i = arch.blocks.size(); i-- > 0;) {
    const BlockSpec& block = arch.blocks[i];
    const Tape::BlockTape& bt = tape.blocks[i];
    const Tensor4& block_in = i == 0 ? tape.stem_out : tape.blocks[i - 1].out;

    relu_backward_inplace(dcur, bt.sum_pre);  // through the block's final relu
    Tensor4 dskip_path = dcur;                // the sum fans out to both branches

    std::size_t proj_at = 0;
    if (block.has_proj) proj_at = prev_pair();
    std::size_t conv3_at = 0;
    if (block.kind == BlockKind::Bottleneck) conv3_at = prev_pair();
    const std::size_t conv2_at = prev_pair();
    const std::size_t conv1_at = prev_pair();

    Tensor4 dmain = std::move(dcur);
    Tensor4 dr1;
    if (block.kind == BlockKind::Bottleneck) {
      Tensor4 r2 = relu(bt.a2);
      Tensor4 dr2;
      conv_backward_full(r2, dmain, block.conv3, arrays[conv3_at].v,
                         grads.arrays[conv3_at].v, grads.arrays[conv3_at + 1].v, &dr2);
      relu_backward_inplace(dr2, bt.a2);
      Tensor4 r1 = relu(bt.a1);
      conv_backward_full(r1, dr2, block.conv2, arrays[conv2_at].v,
                         grads.arrays[conv2_at].v, grads.arrays[conv2_at + 1].v, &dr1);
    } else {
      Tensor4 r1 = relu(bt.a1);
      conv_backward_full(r1, dmain, block.conv2, arrays[conv2_at].v,
                         grads.arrays[conv2_at].v, grads.arrays[conv2_at + 1].v, &dr1);
    }
    relu_backward_inplace(dr1, bt.a1);
    Tensor4 din;
    conv_backward_full(block_in, dr1, block.conv1, arrays[conv1_at].v,
                       grads.arrays[conv1_at].v, grads.arrays[conv1_at + 1].v, &din);

    if (block.has_proj) {
      Tensor4 dproj_in;
      conv_backward_full(block_in, dskip_path, block.proj, arrays[proj_at].v,
                         grads.arrays[proj_at].v, grads.arrays[proj_at + 1].v, &dproj_in);
      for (std::size_t j = 0; j < din.v.size(); ++j) din.v[j] += dproj_in.v[j];
    } else {
      for (std::size_t j = 0; j < din.v.size(); ++j) din.v[j] += dskip_path.v[j];
    }
    dcur = std::move(din);
  }

  if (arch.stem_maxpool) {
    dcur = maxpool_backward(dcur, tape.pool_argmax, tape.stem_pre.h, tape.stem_pre.w);
  }
  relu_backward_inplace(dcur, tape.stem_pre);
  const std::size_t stem_at = prev_pair();
  conv_backward_full(tape.input, dcur, arch.stem, arrays[stem_at].v,
                     grads.arrays[stem_at].v, grads.arrays[stem_at + 1].v, nullptr);
  return grads;
}

}  // namespace mret
