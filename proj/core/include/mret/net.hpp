#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mret/tensor.hpp"

namespace mret {

struct ConvSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
};

enum class BlockKind { Basic, Bottleneck };

/// One residual block. Basic: conv1 (3x3, stride) -> relu -> conv2 (3x3) ->
/// add skip -> relu. Bottleneck: 1x1 reduce -> 3x3 (stride) -> 1x1 expand ->
/// add skip -> relu. Entry blocks carry a 1x1 projection skip.
struct BlockSpec {
  BlockKind kind = BlockKind::Basic;
  ConvSpec conv1, conv2, conv3;  // conv3 unused for Basic
  bool has_proj = false;
  ConvSpec proj;

  int out_ch() const { return kind == BlockKind::Basic ? conv2.out_ch : conv3.out_ch; }
};

/// Architecture descriptor: stem conv (+ optional 3x3/2 max pool), residual
/// blocks, then global average pool and an affine head to 2 logits.
struct NetArch {
  std::string preset;
  int input_side = 128;
  int classes = 2;           // fixed: usable vs unusable
  ConvSpec stem;
  bool stem_maxpool = false;
  std::vector<BlockSpec> blocks;
  int feature_ch = 0;        // channels entering the head

  /// 3x3/8ch stem; 3 stages x 2 basic blocks, widths [8,16,32], stride-2
  /// stage entries with 1x1 projection skips.
  static NetArch micro(int input_side = 128);
  /// 50-layer reference topology: 7x7/2 64ch stem + 3x3/2 max pool, stages
  /// [3,4,6,3] of bottleneck blocks, widths [64,128,256,512] x4 expansion.
  static NetArch resnet50(int input_side = 512);
  static NetArch by_preset(const std::string& preset, std::optional<int> input_side = {});
};

struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
};

struct ParamStore {
  std::vector<ParamArray> arrays;

  std::size_t total_size() const;
  /// Same names and shapes, zero values.
  ParamStore zeros_like() const;
  ParamArray* find(const std::string& name);
  const ParamArray* find(const std::string& name) const;
};

struct Model {
  NetArch arch;
  ParamStore params;
  std::uint64_t init_seed = 0;
  int selected_epoch = -1;  // -1 until trained
};

/// Expected number of scalar parameters, from the descriptor arithmetic alone.
std::size_t param_count(const NetArch& arch);

/// Zero-filled parameter arrays in their canonical order: stem, blocks in
/// network order (conv1, conv2, [conv3], [proj]), head.
ParamStore param_layout(const NetArch& arch);

/// Scaled-uniform fan-in initialization, biases zero, deterministic per seed.
Model init_model(const NetArch& arch, std::uint64_t seed);

/// Activation tape recorded by forward() for the exact backward pass.
struct Tape;

/// Runs the network on a batch (channel = 1, spatial side = arch.input_side;
/// ShapeMismatch otherwise). When tape is given, records what backward needs.
Logits forward(const Model& model, const Tensor4& batch, Tape* tape = nullptr);

/// Exact reverse-mode gradients of the recorded forward pass with respect to
/// every parameter, given dLoss/dlogits.
ParamStore backward(const Model& model, const Tape& tape, const Logits& dlogits);

struct Tape {
  Tensor4 input;
  Tensor4 stem_pre;                 // stem conv output, pre relu
  Tensor4 stem_out;                 // post relu (and post pool if present)
  std::vector<std::int32_t> pool_argmax;
  struct BlockTape {
    Tensor4 a1;        // conv1 output, pre relu
    Tensor4 a2;        // conv2 output, pre relu (bottleneck only)
    Tensor4 sum_pre;   // residual sum, pre final relu
    Tensor4 out;       // block output; next block's input
  };
  std::vector<BlockTape> blocks;
  std::vector<double> pooled;       // n x feature_ch global average
};

}  // namespace mret
