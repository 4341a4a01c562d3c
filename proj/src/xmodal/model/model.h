// xmodal/model/model.h

// Copyright 2026  The xmodal authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xmodal/core/matrix.h"

namespace xmodal {

// One Jasper residual block: `sub_blocks` repetitions of
// conv -> batch norm -> relu -> dropout, with the block input added back
// in (1x1-projected when channel counts differ) before the final relu.
struct BlockSpec {
  int kernel = 11;
  int channels = 256;
  int sub_blocks = 3;
  double dropout = 0.2;
};

// Jasper-lip: transposed-conv frontend (stride 2, exact temporal doubling),
// residual blocks, a dilated context conv, then two pointwise layers down
// to the class logits.
struct ModelConfig {
  size_t input_dim = 16;  // D, feature dimension per student frame
  int num_classes = 29;   // |C'|, logits per output frame

  int upsample_kernel = 11;  // Conv1, transposed, stride 2
  int upsample_channels = 256;
  double upsample_dropout = 0.2;

  std::vector<BlockSpec> blocks;  // B1..Bn

  int dilated_kernel = 29;  // Conv2
  int dilation = 2;
  int dilated_channels = 896;
  double dilated_dropout = 0.4;

  int head_channels = 1024;  // Conv3, pointwise
  double head_dropout = 0.4;

  // Jasper-lip 5x3: five blocks of three sub-blocks.
  static ModelConfig paper_preset(size_t input_dim, int num_classes);
  // Reduced scale for single-machine experiments: three blocks of two.
  static ModelConfig desk_preset(size_t input_dim, int num_classes);

  void validate() const;  // throws ConfigError
  // Trainable scalars (weights, biases, norm scale/shift); running
  // statistics are persistent state, not parameters.
  size_t parameter_count() const;
};

enum class TensorKind {
  kWeight,
  kBias,
  kNormScale,
  kNormShift,
  kRunningMean,
  kRunningVar,
};

inline bool is_trainable(TensorKind kind) {
  return kind != TensorKind::kRunningMean && kind != TensorKind::kRunningVar;
}

// One convolution with optional fused batch normalization. Weight layout
// is tap-major: weight[(k * in_ch + i) * out_ch + o].
template <typename Real>
struct ConvLayer {
  int kernel = 1;
  int dilation = 1;
  bool transposed = false;  // stride-2 upsampling when set
  size_t in_ch = 0;
  size_t out_ch = 0;
  bool has_norm = true;
  std::vector<Real> weight;
  std::vector<Real> bias;  // only when !has_norm
  std::vector<Real> norm_scale, norm_shift;      // gamma, beta
  std::vector<Real> running_mean, running_var;   // eval-mode statistics
};

template <typename Real>
struct ModelParamsT {
  ModelConfig config;

  ConvLayer<Real> upsample;
  struct Block {
    std::vector<ConvLayer<Real>> subs;
    ConvLayer<Real> projection;  // 1x1 on the residual path; unused when
                                 // in/out channels match (in_ch == 0)
    bool has_projection() const { return projection.in_ch != 0; }
  };
  std::vector<Block> blocks;
  ConvLayer<Real> dilated;
  ConvLayer<Real> head;
  ConvLayer<Real> output;  // pointwise to logits; bias, no norm

  // Base of the dropout-seed stream; the trainer advances it per step so
  // checkpoints resume with fresh masks.
  uint64_t dropout_stream = 0;
};

using ModelParams = ModelParamsT<float>;

// Visitor over every tensor in declaration order (the checkpoint order).
template <typename Real>
using TensorVisitor =
    std::function<void(const std::string& name, TensorKind kind, std::vector<Real>& values)>;

template <typename Real>
void for_each_tensor(ModelParamsT<Real>& params, const TensorVisitor<Real>& fn);

// Read-only traversal in the same order.
template <typename Real>
using ConstTensorVisitor = std::function<void(const std::string& name, TensorKind kind,
                                              const std::vector<Real>& values)>;

template <typename Real>
void for_each_tensor(const ModelParamsT<Real>& params, const ConstTensorVisitor<Real>& fn);

// Same-shaped parameter set with every tensor zeroed; gradient container.
template <typename Real>
ModelParamsT<Real> zero_like(const ModelParamsT<Real>& params);

// Fan-in-scaled uniform weights, identity normalization, zero biases.
template <typename Real>
ModelParamsT<Real> model_init(const ModelConfig& config, uint64_t seed);

// Row-major T x C activation plane in the net's working precision.
template <typename Real>
struct PlaneT {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<Real> v;

  PlaneT() = default;
  PlaneT(size_t r, size_t c) : rows(r), cols(c), v(r * c, Real(0)) {}
  Real* row(size_t r) { return v.data() + r * cols; }
  const Real* row(size_t r) const { return v.data() + r * cols; }
  Real& at(size_t r, size_t c) { return v[r * cols + c]; }
  Real at(size_t r, size_t c) const { return v[r * cols + c]; }
  bool empty() const { return v.empty(); }
};

// Activations retained for one conv -> norm -> relu -> dropout unit.
template <typename Real>
struct UnitCacheT {
  PlaneT<Real> x;     // conv input
  PlaneT<Real> z;     // conv output, pre-normalization
  PlaneT<Real> y;     // unit output after relu, before dropout
  PlaneT<Real> mask;  // dropout multipliers; empty when inactive
  std::vector<Real> mean, var;  // batch statistics (train mode)
};

template <typename Real>
struct BlockCacheT {
  std::vector<UnitCacheT<Real>> subs;
  UnitCacheT<Real> projection;  // empty x when the residual is an identity
};

// Valid only for the (params, features) pair that produced it.
template <typename Real>
struct ForwardCacheT {
  bool train = false;
  size_t frames_v = 0;
  UnitCacheT<Real> upsample;
  std::vector<BlockCacheT<Real>> blocks;
  UnitCacheT<Real> dilated;
  UnitCacheT<Real> head;
  PlaneT<Real> output_in;  // input of the final pointwise layer
};

template <typename Real>
struct ForwardResult {
  Matrix logits;  // (2 * T_v) x num_classes
  ForwardCacheT<Real> cache;
};

// In train mode applies dropout and updates running statistics (hence the
// mutable params); eval mode is deterministic and leaves params untouched.
template <typename Real>
ForwardResult<Real> forward(ModelParamsT<Real>& params, const Matrix& features,
                            bool train_mode, uint64_t dropout_seed);

template <typename Real>
struct BackwardResult {
  ModelParamsT<Real> grads;  // same shapes; running-stat slots stay zero
  Matrix input_grads;        // T_v x D
};

template <typename Real>
BackwardResult<Real> backward(const ModelParamsT<Real>& params,
                              const ForwardCacheT<Real>& cache,
                              const Matrix& grad_logits);

// Versioned binary checkpoint: magic "JLIP", config echo, dropout stream
// position, then tensors in declaration order as little-endian float32.
template <typename Real>
void save_checkpoint(const ModelParamsT<Real>& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace xmodal
