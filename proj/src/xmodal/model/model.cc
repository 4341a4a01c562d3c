// xmodal/model/model.cc

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

#include "xmodal/model/model.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/core/binary_io.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/rng.h"
#include "xmodal/kernels/kernels.h"

namespace xmodal {
namespace {

constexpr double kNormEps = 1e-5;
constexpr double kNormMomentum = 0.9;
constexpr char kCheckpointMagic[] = "JLIP";
constexpr uint32_t kCheckpointVersion = 1;

// Single precision runs on the runtime-selected kernels backend; double
// precision runs reference loops so the finite-difference oracle sees a
// numerically clean computation.

void gemm_nn(size_t m, size_t n, size_t k, const float* a, size_t lda,
             const float* b, size_t ldb, float* c, size_t ldc) {
  kernels::active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn(size_t m, size_t n, size_t k, const float* a, size_t lda,
             const float* b, size_t ldb, float* c, size_t ldc) {
  kernels::active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_nt(size_t m, size_t n, size_t k, const float* a, size_t lda,
             const float* b, size_t ldb, float* c, size_t ldc) {
  kernels::active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_nn(size_t m, size_t n, size_t k, const double* a, size_t lda,
             const double* b, size_t ldb, double* c, size_t ldc) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (size_t l = 0; l < k; ++l) {
      const double av = a[i * lda + l];
      const double* brow = b + l * ldb;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(size_t m, size_t n, size_t k, const double* a, size_t lda,
             const double* b, size_t ldb, double* c, size_t ldc) {
  for (size_t l = 0; l < k; ++l) {
    const double* arow = a + l * lda;
    const double* brow = b + l * ldb;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * ldc;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(size_t m, size_t n, size_t k, const double* a, size_t lda,
             const double* b, size_t ldb, double* c, size_t ldc) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    double* crow = c + i * ldc;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * ldb;
      double acc = 0.0;
      for (size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

void relu_inplace(float* x, size_t n) { kernels::active().relu(x, n); }

void relu_inplace(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_gate(float* grad, const float* out, size_t n) {
  kernels::active().relu_grad(grad, out, n);
}

void relu_gate(double* grad, const double* out, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (out[i] <= 0.0) grad[i] = 0.0;
}

template <typename Real>
ConvLayer<Real> make_layer(int kernel, int dilation, bool transposed,
                           size_t in_ch, size_t out_ch, bool has_norm) {
  ConvLayer<Real> layer;
  layer.kernel = kernel;
  layer.dilation = dilation;
  layer.transposed = transposed;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.has_norm = has_norm;
  layer.weight.assign(static_cast<size_t>(kernel) * in_ch * out_ch, Real(0));
  if (has_norm) {
    layer.norm_scale.assign(out_ch, Real(0));
    layer.norm_shift.assign(out_ch, Real(0));
    layer.running_mean.assign(out_ch, Real(0));
    layer.running_var.assign(out_ch, Real(0));
  } else {
    layer.bias.assign(out_ch, Real(0));
  }
  return layer;
}

// All tensors zero; model_init fills weights and sets scale/variance to 1.
template <typename Real>
ModelParamsT<Real> make_params(const ModelConfig& config) {
  config.validate();
  ModelParamsT<Real> params;
  params.config = config;
  params.upsample = make_layer<Real>(config.upsample_kernel, 1, true,
                                     config.input_dim,
                                     config.upsample_channels, true);
  size_t ch = static_cast<size_t>(config.upsample_channels);
  params.blocks.resize(config.blocks.size());
  for (size_t b = 0; b < config.blocks.size(); ++b) {
    const BlockSpec& spec = config.blocks[b];
    auto& block = params.blocks[b];
    size_t in = ch;
    for (int s = 0; s < spec.sub_blocks; ++s) {
      block.subs.push_back(
          make_layer<Real>(spec.kernel, 1, false, in, spec.channels, true));
      in = static_cast<size_t>(spec.channels);
    }
    if (ch != static_cast<size_t>(spec.channels)) {
      block.projection =
          make_layer<Real>(1, 1, false, ch, spec.channels, true);
    }
    ch = static_cast<size_t>(spec.channels);
  }
  params.dilated = make_layer<Real>(config.dilated_kernel, config.dilation,
                                    false, ch, config.dilated_channels, true);
  params.head = make_layer<Real>(1, 1, false, config.dilated_channels,
                                 config.head_channels, true);
  params.output = make_layer<Real>(1, 1, false, config.head_channels,
                                   config.num_classes, false);
  return params;
}

// Layer traversal in declaration order; `Params` may be const-qualified.
template <typename Params, typename Fn>
void walk_layers(Params& params, Fn&& fn) {
  fn(params.upsample, std::string("upsample"));
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    auto& block = params.blocks[b];
    const std::string prefix = "block" + std::to_string(b + 1);
    for (size_t s = 0; s < block.subs.size(); ++s) {
      fn(block.subs[s], prefix + ".sub" + std::to_string(s + 1));
    }
    if (block.has_projection()) fn(block.projection, prefix + ".projection");
  }
  fn(params.dilated, std::string("dilated"));
  fn(params.head, std::string("head"));
  fn(params.output, std::string("output"));
}

// Tensor traversal within one layer; `Layer` may be const-qualified.
template <typename Layer, typename Fn>
void layer_tensors(Layer& layer, Fn&& fn) {
  fn("weight", TensorKind::kWeight, layer.weight);
  if (!layer.has_norm) {
    fn("bias", TensorKind::kBias, layer.bias);
    return;
  }
  fn("norm_scale", TensorKind::kNormScale, layer.norm_scale);
  fn("norm_shift", TensorKind::kNormShift, layer.norm_shift);
  fn("running_mean", TensorKind::kRunningMean, layer.running_mean);
  fn("running_var", TensorKind::kRunningVar, layer.running_var);
}

template <typename Real>
PlaneT<Real> conv_fwd(const ConvLayer<Real>& layer, const PlaneT<Real>& x) {
  const long frames = static_cast<long>(x.rows);
  const size_t out_rows = layer.transposed ? 2 * x.rows : x.rows;
  PlaneT<Real> y(out_rows, layer.out_ch);
  const size_t tap = layer.in_ch * layer.out_ch;
  if (!layer.transposed) {
    const long pad = static_cast<long>(layer.kernel - 1) / 2 * layer.dilation;
    for (int k = 0; k < layer.kernel; ++k) {
      const long offset = static_cast<long>(k) * layer.dilation - pad;
      const long t0 = std::max<long>(0, -offset);
      const long t1 = std::min<long>(frames, frames - offset);
      if (t1 <= t0) continue;
      gemm_nn(static_cast<size_t>(t1 - t0), layer.out_ch, layer.in_ch,
              x.row(static_cast<size_t>(t0 + offset)), x.cols,
              layer.weight.data() + static_cast<size_t>(k) * tap, layer.out_ch,
              y.row(static_cast<size_t>(t0)), y.cols);
    }
  } else {
    // Stride-2 fractional conv: input frame t contributes to output frame
    // 2t + k - pad, giving exactly 2*T_v rows for odd kernels.
    const long pad = static_cast<long>(layer.kernel - 1) / 2;
    for (int k = 0; k < layer.kernel; ++k) {
      const long shift = static_cast<long>(k) - pad;
      const long t0 = shift >= 0 ? 0 : (-shift + 1) / 2;
      const long num = static_cast<long>(out_rows) - 1 - shift;
      if (num < 0) continue;
      const long t1 = std::min<long>(frames, num / 2 + 1);
      if (t1 <= t0) continue;
      gemm_nn(static_cast<size_t>(t1 - t0), layer.out_ch, layer.in_ch,
              x.row(static_cast<size_t>(t0)), x.cols,
              layer.weight.data() + static_cast<size_t>(k) * tap, layer.out_ch,
              y.row(static_cast<size_t>(2 * t0 + shift)), 2 * y.cols);
    }
  }
  if (!layer.has_norm) {
    for (size_t t = 0; t < out_rows; ++t) {
      Real* row = y.row(t);
      for (size_t c = 0; c < layer.out_ch; ++c) row[c] += layer.bias[c];
    }
  }
  return y;
}

// Accumulates dW (and db) into `grad` and returns dL/dx.
template <typename Real>
PlaneT<Real> conv_bwd(const ConvLayer<Real>& layer, ConvLayer<Real>& grad,
                      const PlaneT<Real>& x, const PlaneT<Real>& dy) {
  const long frames = static_cast<long>(x.rows);
  PlaneT<Real> dx(x.rows, x.cols);
  const size_t tap = layer.in_ch * layer.out_ch;
  if (!layer.transposed) {
    const long pad = static_cast<long>(layer.kernel - 1) / 2 * layer.dilation;
    for (int k = 0; k < layer.kernel; ++k) {
      const long offset = static_cast<long>(k) * layer.dilation - pad;
      const long t0 = std::max<long>(0, -offset);
      const long t1 = std::min<long>(frames, frames - offset);
      if (t1 <= t0) continue;
      const size_t m = static_cast<size_t>(t1 - t0);
      gemm_tn(layer.in_ch, layer.out_ch, m,
              x.row(static_cast<size_t>(t0 + offset)), x.cols,
              dy.row(static_cast<size_t>(t0)), dy.cols,
              grad.weight.data() + static_cast<size_t>(k) * tap, layer.out_ch);
      gemm_nt(m, layer.in_ch, layer.out_ch, dy.row(static_cast<size_t>(t0)),
              dy.cols, layer.weight.data() + static_cast<size_t>(k) * tap,
              layer.out_ch, dx.row(static_cast<size_t>(t0 + offset)), dx.cols);
    }
  } else {
    const long pad = static_cast<long>(layer.kernel - 1) / 2;
    const long out_rows = static_cast<long>(dy.rows);
    for (int k = 0; k < layer.kernel; ++k) {
      const long shift = static_cast<long>(k) - pad;
      const long t0 = shift >= 0 ? 0 : (-shift + 1) / 2;
      const long num = out_rows - 1 - shift;
      if (num < 0) continue;
      const long t1 = std::min<long>(frames, num / 2 + 1);
      if (t1 <= t0) continue;
      const size_t m = static_cast<size_t>(t1 - t0);
      const Real* dy0 = dy.row(static_cast<size_t>(2 * t0 + shift));
      gemm_tn(layer.in_ch, layer.out_ch, m, x.row(static_cast<size_t>(t0)),
              x.cols, dy0, 2 * dy.cols,
              grad.weight.data() + static_cast<size_t>(k) * tap, layer.out_ch);
      gemm_nt(m, layer.in_ch, layer.out_ch, dy0, 2 * dy.cols,
              layer.weight.data() + static_cast<size_t>(k) * tap, layer.out_ch,
              dx.row(static_cast<size_t>(t0)), dx.cols);
    }
  }
  if (!layer.has_norm) {
    for (size_t t = 0; t < dy.rows; ++t) {
      const Real* row = dy.row(t);
      for (size_t c = 0; c < layer.out_ch; ++c) grad.bias[c] += row[c];
    }
  }
  return dx;
}

// Per-channel batch normalization over the time axis (biased variance).
template <typename Real>
PlaneT<Real> norm_fwd(ConvLayer<Real>& layer, const PlaneT<Real>& z,
                      bool train, UnitCacheT<Real>& cache) {
  const size_t frames = z.rows;
  const size_t channels = z.cols;
  std::vector<double> scale(channels), shift(channels);
  if (train) {
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    for (size_t t = 0; t < frames; ++t) {
      const Real* row = z.row(t);
      for (size_t c = 0; c < channels; ++c) mean[c] += row[c];
    }
    for (size_t c = 0; c < channels; ++c) mean[c] /= static_cast<double>(frames);
    for (size_t t = 0; t < frames; ++t) {
      const Real* row = z.row(t);
      for (size_t c = 0; c < channels; ++c) {
        const double d = row[c] - mean[c];
        var[c] += d * d;
      }
    }
    cache.mean.resize(channels);
    cache.var.resize(channels);
    for (size_t c = 0; c < channels; ++c) {
      var[c] /= static_cast<double>(frames);
      cache.mean[c] = static_cast<Real>(mean[c]);
      cache.var[c] = static_cast<Real>(var[c]);
      layer.running_mean[c] = static_cast<Real>(
          kNormMomentum * layer.running_mean[c] + (1.0 - kNormMomentum) * mean[c]);
      layer.running_var[c] = static_cast<Real>(
          kNormMomentum * layer.running_var[c] + (1.0 - kNormMomentum) * var[c]);
      const double ivar = 1.0 / std::sqrt(var[c] + kNormEps);
      scale[c] = static_cast<double>(layer.norm_scale[c]) * ivar;
      shift[c] = static_cast<double>(layer.norm_shift[c]) - mean[c] * scale[c];
    }
  } else {
    for (size_t c = 0; c < channels; ++c) {
      const double ivar =
          1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) + kNormEps);
      scale[c] = static_cast<double>(layer.norm_scale[c]) * ivar;
      shift[c] = static_cast<double>(layer.norm_shift[c]) -
                 static_cast<double>(layer.running_mean[c]) * scale[c];
    }
  }
  PlaneT<Real> y(frames, channels);
  for (size_t t = 0; t < frames; ++t) {
    const Real* zrow = z.row(t);
    Real* yrow = y.row(t);
    for (size_t c = 0; c < channels; ++c)
      yrow[c] = static_cast<Real>(zrow[c] * scale[c] + shift[c]);
  }
  return y;
}

// Accumulates scale/shift grads into `grad` and returns dL/dz. Valid only
// for train-mode caches (batch statistics present).
template <typename Real>
PlaneT<Real> norm_bwd(const ConvLayer<Real>& layer, ConvLayer<Real>& grad,
                      const UnitCacheT<Real>& cache, const PlaneT<Real>& dy) {
  const size_t frames = dy.rows;
  const size_t channels = dy.cols;
  std::vector<double> ivar(channels), sum_dy(channels, 0.0),
      sum_dy_xhat(channels, 0.0);
  for (size_t c = 0; c < channels; ++c)
    ivar[c] = 1.0 / std::sqrt(static_cast<double>(cache.var[c]) + kNormEps);
  for (size_t t = 0; t < frames; ++t) {
    const Real* zrow = cache.z.row(t);
    const Real* drow = dy.row(t);
    for (size_t c = 0; c < channels; ++c) {
      const double xhat = (zrow[c] - static_cast<double>(cache.mean[c])) * ivar[c];
      sum_dy[c] += drow[c];
      sum_dy_xhat[c] += drow[c] * xhat;
    }
  }
  for (size_t c = 0; c < channels; ++c) {
    grad.norm_scale[c] += static_cast<Real>(sum_dy_xhat[c]);
    grad.norm_shift[c] += static_cast<Real>(sum_dy[c]);
  }
  PlaneT<Real> dz(frames, channels);
  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (size_t t = 0; t < frames; ++t) {
    const Real* zrow = cache.z.row(t);
    const Real* drow = dy.row(t);
    Real* orow = dz.row(t);
    for (size_t c = 0; c < channels; ++c) {
      const double xhat = (zrow[c] - static_cast<double>(cache.mean[c])) * ivar[c];
      const double centered = static_cast<double>(frames) * drow[c] - sum_dy[c] -
                              xhat * sum_dy_xhat[c];
      orow[c] = static_cast<Real>(static_cast<double>(layer.norm_scale[c]) *
                                  ivar[c] * inv_frames * centered);
    }
  }
  return dz;
}

// Inverted dropout: surviving activations scale by 1/(1-rate) so eval mode
// needs no correction. Each site draws from its own seeded generator.
template <typename Real>
void dropout_fwd(PlaneT<Real>& y, double rate, uint64_t site_seed,
                 PlaneT<Real>& mask_out) {
  mask_out = PlaneT<Real>(y.rows, y.cols);
  std::mt19937_64 rng(site_seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Real scale = static_cast<Real>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < y.v.size(); ++i) {
    const Real m = uniform(rng) >= rate ? scale : Real(0);
    mask_out.v[i] = m;
    y.v[i] *= m;
  }
}

// conv -> norm -> (+ residual) -> relu -> dropout.
template <typename Real>
PlaneT<Real> unit_fwd(ConvLayer<Real>& layer, const PlaneT<Real>& x,
                      double dropout, bool train, uint64_t site_seed,
                      UnitCacheT<Real>& cache,
                      const PlaneT<Real>* residual = nullptr) {
  cache.x = x;
  cache.z = conv_fwd(layer, x);
  PlaneT<Real> y = norm_fwd(layer, cache.z, train, cache);
  if (residual) {
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += residual->v[i];
  }
  relu_inplace(y.v.data(), y.v.size());
  cache.y = y;
  if (train && dropout > 0.0) dropout_fwd(y, dropout, site_seed, cache.mask);
  return y;
}

// Residual projection: 1x1 conv -> norm, no activation or dropout.
template <typename Real>
PlaneT<Real> proj_fwd(ConvLayer<Real>& layer, const PlaneT<Real>& x,
                      bool train, UnitCacheT<Real>& cache) {
  cache.x = x;
  cache.z = conv_fwd(layer, x);
  return norm_fwd(layer, cache.z, train, cache);
}

template <typename Real>
PlaneT<Real> unit_bwd(const ConvLayer<Real>& layer, ConvLayer<Real>& grad,
                      const UnitCacheT<Real>& cache, PlaneT<Real> d) {
  if (!cache.mask.empty()) {
    for (size_t i = 0; i < d.v.size(); ++i) d.v[i] *= cache.mask.v[i];
  }
  relu_gate(d.v.data(), cache.y.v.data(), d.v.size());
  const PlaneT<Real> dz = norm_bwd(layer, grad, cache, d);
  return conv_bwd(layer, grad, cache.x, dz);
}

void check_kernel(int kernel, const char* what) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError(std::string(what) + " kernel must be odd and positive, got " +
                      std::to_string(kernel));
  }
}

void check_channels(int channels, const char* what) {
  if (channels < 1) {
    throw ConfigError(std::string(what) + " channels must be positive, got " +
                      std::to_string(channels));
  }
}

void check_dropout(double rate, const char* what) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError(std::string(what) + " dropout must lie in [0, 1), got " +
                      std::to_string(rate));
  }
}

void serialize_config(std::string& out, const ModelConfig& config) {
  binary::put_u64(out, config.input_dim);
  binary::put_u32(out, static_cast<uint32_t>(config.num_classes));
  binary::put_u32(out, static_cast<uint32_t>(config.upsample_kernel));
  binary::put_u32(out, static_cast<uint32_t>(config.upsample_channels));
  binary::put_f64(out, config.upsample_dropout);
  binary::put_u32(out, static_cast<uint32_t>(config.blocks.size()));
  for (const BlockSpec& block : config.blocks) {
    binary::put_u32(out, static_cast<uint32_t>(block.kernel));
    binary::put_u32(out, static_cast<uint32_t>(block.channels));
    binary::put_u32(out, static_cast<uint32_t>(block.sub_blocks));
    binary::put_f64(out, block.dropout);
  }
  binary::put_u32(out, static_cast<uint32_t>(config.dilated_kernel));
  binary::put_u32(out, static_cast<uint32_t>(config.dilation));
  binary::put_u32(out, static_cast<uint32_t>(config.dilated_channels));
  binary::put_f64(out, config.dilated_dropout);
  binary::put_u32(out, static_cast<uint32_t>(config.head_channels));
  binary::put_f64(out, config.head_dropout);
}

ModelConfig parse_config(binary::Reader& in) {
  ModelConfig config;
  config.input_dim = in.u64();
  config.num_classes = static_cast<int>(in.u32());
  config.upsample_kernel = static_cast<int>(in.u32());
  config.upsample_channels = static_cast<int>(in.u32());
  config.upsample_dropout = in.f64();
  const uint32_t num_blocks = in.u32();
  config.blocks.clear();
  for (uint32_t b = 0; b < num_blocks; ++b) {
    BlockSpec block;
    block.kernel = static_cast<int>(in.u32());
    block.channels = static_cast<int>(in.u32());
    block.sub_blocks = static_cast<int>(in.u32());
    block.dropout = in.f64();
    config.blocks.push_back(block);
  }
  config.dilated_kernel = static_cast<int>(in.u32());
  config.dilation = static_cast<int>(in.u32());
  config.dilated_channels = static_cast<int>(in.u32());
  config.dilated_dropout = in.f64();
  config.head_channels = static_cast<int>(in.u32());
  config.head_dropout = in.f64();
  return config;
}

}  // namespace

ModelConfig ModelConfig::paper_preset(size_t input_dim, int num_classes) {
  ModelConfig config;
  config.input_dim = input_dim;
  config.num_classes = num_classes;
  config.upsample_kernel = 11;
  config.upsample_channels = 256;
  config.upsample_dropout = 0.2;
  config.blocks = {
      {11, 256, 3, 0.2}, {13, 384, 3, 0.2}, {17, 512, 3, 0.2},
      {21, 640, 3, 0.3}, {25, 768, 3, 0.3},
  };
  config.dilated_kernel = 29;
  config.dilation = 2;
  config.dilated_channels = 896;
  config.dilated_dropout = 0.4;
  config.head_channels = 1024;
  config.head_dropout = 0.4;
  return config;
}

ModelConfig ModelConfig::desk_preset(size_t input_dim, int num_classes) {
  ModelConfig config;
  config.input_dim = input_dim;
  config.num_classes = num_classes;
  config.upsample_kernel = 11;
  config.upsample_channels = 64;
  config.upsample_dropout = 0.2;
  config.blocks = {{11, 64, 2, 0.2}, {13, 96, 2, 0.2}, {17, 128, 2, 0.2}};
  config.dilated_kernel = 29;
  config.dilation = 2;
  config.dilated_channels = 160;
  config.dilated_dropout = 0.3;
  config.head_channels = 192;
  config.head_dropout = 0.3;
  return config;
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (blocks.empty()) throw ConfigError("at least one residual block is required");
  check_kernel(upsample_kernel, "upsample");
  check_channels(upsample_channels, "upsample");
  check_dropout(upsample_dropout, "upsample");
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string what = "block " + std::to_string(b + 1);
    check_kernel(blocks[b].kernel, what.c_str());
    check_channels(blocks[b].channels, what.c_str());
    check_dropout(blocks[b].dropout, what.c_str());
    if (blocks[b].sub_blocks < 1) {
      throw ConfigError(what + " needs at least one sub-block");
    }
  }
  check_kernel(dilated_kernel, "dilated");
  check_channels(dilated_channels, "dilated");
  check_dropout(dilated_dropout, "dilated");
  if (dilation < 1) throw ConfigError("dilation must be positive");
  check_channels(head_channels, "head");
  check_dropout(head_dropout, "head");
}

size_t ModelConfig::parameter_count() const {
  ModelParamsT<float> params = make_params<float>(*this);
  size_t total = 0;
  walk_layers(params, [&](const ConvLayer<float>& layer, const std::string&) {
    layer_tensors(layer, [&](const char*, TensorKind kind,
                             const std::vector<float>& values) {
      if (is_trainable(kind)) total += values.size();
    });
  });
  return total;
}

template <typename Real>
void for_each_tensor(ModelParamsT<Real>& params, const TensorVisitor<Real>& fn) {
  walk_layers(params, [&](ConvLayer<Real>& layer, const std::string& name) {
    layer_tensors(layer, [&](const char* suffix, TensorKind kind,
                             std::vector<Real>& values) {
      fn(name + "." + suffix, kind, values);
    });
  });
}

template <typename Real>
void for_each_tensor(const ModelParamsT<Real>& params, const ConstTensorVisitor<Real>& fn) {
  walk_layers(params, [&](const ConvLayer<Real>& layer, const std::string& name) {
    layer_tensors(layer, [&](const char* suffix, TensorKind kind,
                             const std::vector<Real>& values) {
      fn(name + "." + suffix, kind, values);
    });
  });
}

template <typename Real>
ModelParamsT<Real> zero_like(const ModelParamsT<Real>& params) {
  return make_params<Real>(params.config);
}

template <typename Real>
ModelParamsT<Real> model_init(const ModelConfig& config, uint64_t seed) {
  ModelParamsT<Real> params = make_params<Real>(config);
  std::mt19937_64 rng(splitmix64(seed));
  walk_layers(params, [&](ConvLayer<Real>& layer, const std::string&) {
    const double lim = std::sqrt(
        1.0 / (static_cast<double>(layer.kernel) * static_cast<double>(layer.in_ch)));
    std::uniform_real_distribution<double> uniform(-lim, lim);
    for (Real& w : layer.weight) w = static_cast<Real>(uniform(rng));
    if (layer.has_norm) {
      std::fill(layer.norm_scale.begin(), layer.norm_scale.end(), Real(1));
      std::fill(layer.running_var.begin(), layer.running_var.end(), Real(1));
    }
  });
  return params;
}

template <typename Real>
ForwardResult<Real> forward(ModelParamsT<Real>& params, const Matrix& features,
                            bool train_mode, uint64_t dropout_seed) {
  const ModelConfig& config = params.config;
  if (features.rows() == 0) {
    throw ShapeMismatchError("forward needs at least one input frame");
  }
  if (features.cols() != config.input_dim) {
    throw ShapeMismatchError("feature dim " + std::to_string(features.cols()) +
                             " does not match model input dim " +
                             std::to_string(config.input_dim));
  }

  ForwardResult<Real> result;
  ForwardCacheT<Real>& cache = result.cache;
  cache.train = train_mode;
  cache.frames_v = features.rows();

  PlaneT<Real> h(features.rows(), features.cols());
  for (size_t i = 0; i < h.v.size(); ++i)
    h.v[i] = static_cast<Real>(features.data()[i]);

  uint64_t site = 0;
  h = unit_fwd(params.upsample, h, config.upsample_dropout, train_mode,
               mix_seed(dropout_seed, site++), cache.upsample);
  cache.blocks.resize(params.blocks.size());
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    auto& block = params.blocks[b];
    auto& block_cache = cache.blocks[b];
    const double rate = config.blocks[b].dropout;
    block_cache.subs.resize(block.subs.size());
    for (size_t s = 0; s < block.subs.size(); ++s) {
      if (s + 1 < block.subs.size()) {
        h = unit_fwd(block.subs[s], h, rate, train_mode,
                     mix_seed(dropout_seed, site++), block_cache.subs[s]);
        continue;
      }
      // Final sub-block: the block input re-enters before the activation.
      const PlaneT<Real>& block_in = s == 0 ? h : block_cache.subs[0].x;
      PlaneT<Real> shortcut;
      const PlaneT<Real>* residual = &block_in;
      if (block.has_projection()) {
        shortcut = proj_fwd(block.projection, block_in, train_mode,
                            block_cache.projection);
        residual = &shortcut;
      }
      h = unit_fwd(block.subs[s], h, rate, train_mode,
                   mix_seed(dropout_seed, site++), block_cache.subs[s],
                   residual);
    }
  }
  h = unit_fwd(params.dilated, h, config.dilated_dropout, train_mode,
               mix_seed(dropout_seed, site++), cache.dilated);
  h = unit_fwd(params.head, h, config.head_dropout, train_mode,
               mix_seed(dropout_seed, site++), cache.head);
  cache.output_in = h;
  const PlaneT<Real> logits = conv_fwd(params.output, h);

  result.logits = Matrix(logits.rows, logits.cols);
  for (size_t i = 0; i < logits.v.size(); ++i)
    result.logits.data()[i] = static_cast<double>(logits.v[i]);
  return result;
}

template <typename Real>
BackwardResult<Real> backward(const ModelParamsT<Real>& params,
                              const ForwardCacheT<Real>& cache,
                              const Matrix& grad_logits) {
  if (!cache.train) {
    throw StaleCacheError("backward requires a cache from a train-mode forward");
  }
  const size_t out_rows = 2 * cache.frames_v;
  if (cache.blocks.size() != params.blocks.size() ||
      cache.output_in.rows != out_rows ||
      cache.output_in.cols != static_cast<size_t>(params.config.head_channels)) {
    throw StaleCacheError("forward cache does not match this model");
  }
  if (grad_logits.rows() != out_rows ||
      grad_logits.cols() != static_cast<size_t>(params.config.num_classes)) {
    throw StaleCacheError(
        "grad_logits is " + std::to_string(grad_logits.rows()) + "x" +
        std::to_string(grad_logits.cols()) + ", cache expects " +
        std::to_string(out_rows) + "x" +
        std::to_string(params.config.num_classes));
  }

  BackwardResult<Real> result;
  result.grads = zero_like(params);
  ModelParamsT<Real>& grads = result.grads;

  PlaneT<Real> d(out_rows, static_cast<size_t>(params.config.num_classes));
  for (size_t i = 0; i < d.v.size(); ++i)
    d.v[i] = static_cast<Real>(grad_logits.data()[i]);

  d = conv_bwd(params.output, grads.output, cache.output_in, d);
  d = unit_bwd(params.head, grads.head, cache.head, std::move(d));
  d = unit_bwd(params.dilated, grads.dilated, cache.dilated, std::move(d));

  for (size_t b = params.blocks.size(); b-- > 0;) {
    const auto& block = params.blocks[b];
    const auto& block_cache = cache.blocks[b];
    auto& block_grads = grads.blocks[b];
    const size_t last = block.subs.size() - 1;

    // The incoming gradient splits at the pre-activation sum: one branch
    // continues down the conv chain, the other takes the residual path.
    PlaneT<Real> d_residual;
    {
      const UnitCacheT<Real>& unit = block_cache.subs[last];
      if (!unit.mask.empty()) {
        for (size_t i = 0; i < d.v.size(); ++i) d.v[i] *= unit.mask.v[i];
      }
      relu_gate(d.v.data(), unit.y.v.data(), d.v.size());
      d_residual = d;
      const PlaneT<Real> dz =
          norm_bwd(block.subs[last], block_grads.subs[last], unit, d);
      d = conv_bwd(block.subs[last], block_grads.subs[last], unit.x, dz);
    }
    for (size_t s = last; s-- > 0;) {
      d = unit_bwd(block.subs[s], block_grads.subs[s], block_cache.subs[s],
                   std::move(d));
    }
    if (block.has_projection()) {
      const PlaneT<Real> dz = norm_bwd(block.projection, block_grads.projection,
                                       block_cache.projection, d_residual);
      const PlaneT<Real> dxp = conv_bwd(block.projection, block_grads.projection,
                                        block_cache.projection.x, dz);
      for (size_t i = 0; i < d.v.size(); ++i) d.v[i] += dxp.v[i];
    } else {
      for (size_t i = 0; i < d.v.size(); ++i) d.v[i] += d_residual.v[i];
    }
  }

  d = unit_bwd(params.upsample, grads.upsample, cache.upsample, std::move(d));
  result.input_grads = Matrix(cache.frames_v, params.config.input_dim);
  for (size_t i = 0; i < d.v.size(); ++i)
    result.input_grads.data()[i] = static_cast<double>(d.v[i]);
  return result;
}

template <typename Real>
void save_checkpoint(const ModelParamsT<Real>& params, const std::string& path) {
  params.config.validate();
  std::string out;
  out.append(kCheckpointMagic, 4);
  binary::put_u32(out, kCheckpointVersion);
  serialize_config(out, params.config);
  binary::put_u64(out, params.dropout_stream);
  walk_layers(params, [&](const ConvLayer<Real>& layer, const std::string&) {
    layer_tensors(layer, [&](const char*, TensorKind,
                             const std::vector<Real>& values) {
      for (Real v : values) binary::put_f32(out, static_cast<float>(v));
    });
  });
  binary::write_file(path, out);
}

ModelParams load_checkpoint(const std::string& path) {
  const std::string buf = binary::read_file(path);
  binary::Reader in(buf, path);
  in.expect_magic(kCheckpointMagic);
  const uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  const ModelConfig config = parse_config(in);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path + ": invalid config echo: " + e.what());
  }
  ModelParams params = make_params<float>(config);
  params.dropout_stream = in.u64();
  walk_layers(params, [&](ConvLayer<float>& layer, const std::string&) {
    layer_tensors(layer, [&](const char*, TensorKind, std::vector<float>& values) {
      for (float& v : values) v = in.f32();
    });
  });
  in.expect_end();
  return params;
}

template void for_each_tensor<float>(ModelParamsT<float>&,
                                     const TensorVisitor<float>&);
template void for_each_tensor<double>(ModelParamsT<double>&,
                                      const TensorVisitor<double>&);
template void for_each_tensor<float>(const ModelParamsT<float>&,
                                     const ConstTensorVisitor<float>&);
template void for_each_tensor<double>(const ModelParamsT<double>&,
                                      const ConstTensorVisitor<double>&);
template ModelParamsT<float> zero_like<float>(const ModelParamsT<float>&);
template ModelParamsT<double> zero_like<double>(const ModelParamsT<double>&);
template ModelParamsT<float> model_init<float>(const ModelConfig&, uint64_t);
template ModelParamsT<double> model_init<double>(const ModelConfig&, uint64_t);
template ForwardResult<float> forward<float>(ModelParamsT<float>&, const Matrix&,
                                             bool, uint64_t);
template ForwardResult<double> forward<double>(ModelParamsT<double>&,
                                               const Matrix&, bool, uint64_t);
template BackwardResult<float> backward<float>(const ModelParamsT<float>&,
                                               const ForwardCacheT<float>&,
                                               const Matrix&);
template BackwardResult<double> backward<double>(const ModelParamsT<double>&,
                                                 const ForwardCacheT<double>&,
                                                 const Matrix&);
template void save_checkpoint<float>(const ModelParamsT<float>&,
                                     const std::string&);
template void save_checkpoint<double>(const ModelParamsT<double>&,
                                      const std::string&);

}  // namespace xmodal
