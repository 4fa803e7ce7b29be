// Copyright 2026 The pQRNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The pQRNN encoder stack: a bottleneck layer over ternary projections
// followed by bidirectional QRNN layers.
//
//   X[T x N] -> ReLU(BN(X W + b)) -> L x biQRNN -> O[T x 2S]
//
// Each QRNN direction computes Z/F/O gates with a causal width-k convolution,
// batch-normalizes them over valid (unpadded) timesteps only, and runs
// fo-pooling. Zoneout on the forget gate uses probability base^layer.
// Quantization-aware training fake-quantizes weights and layer outputs to
// 8 bits with straight-through gradients.

#ifndef PQRNN_ENCODER_H_
#define PQRNN_ENCODER_H_

#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pqrnn/params.h"
#include "pqrnn/projection.h"
#include "pqrnn/tensor.h"

namespace pqrnn {

struct EncoderConfig {
  int bottleneck_dim = 256;  // B
  int state_size = 128;      // S, per direction
  int num_layers = 4;        // L
  int kernel_width = 2;      // k
  double zoneout_base = 0.5;
  double projection_dropout = 0.8;  // drop probability
  bool quantize = true;
  bool batch_norm = true;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  double quant_momentum = 0.99;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Per-channel moments measured on the valid positions of one batch.
struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> var;
};

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.99;
  double epsilon = 1e-3;

  BatchNormState() = default;
  BatchNormState(int channels, double momentum, double epsilon);
  int channels() const { return static_cast<int>(running_mean.size()); }
  // running = momentum * running + (1 - momentum) * observed.
  void update(const BatchMoments& observed);
};

// Asymmetric 8-bit range. The effective range always includes zero.
struct QuantRange {
  double min = 0;
  double max = 0;
  bool initialized = false;
  int bits = 8;

  // First observation sets the range, later ones move it by an exponential
  // moving average with the given momentum.
  void observe(double lo, double hi, double momentum);
  double lo() const { return std::min(min, 0.0); }
  double hi() const { return std::max(max, 0.0); }
  double scale() const;  // (hi - lo) / 255, or 1 for a degenerate range
  int zero_point() const;
};

// Mean/variance per channel over rows with mask == 1. x is [..., C] and mask
// has one entry per row. Throws InputError when no row is valid.
template <typename Real>
BatchMoments masked_moments(const Tensor<Real>& x, const Tensor<Real>& mask);

// Batch normalization that ignores padded rows. Training mode normalizes with
// the valid-row moments (reported through `observed`); inference uses the
// running statistics. Masked rows are output as zeros.
template <typename Real>
Var<Real> masked_batch_norm(Tape<Real>& tape, const Var<Real>& x,
                            const Tensor<Real>& mask, const Var<Real>& gamma,
                            const Var<Real>& beta, const BatchNormState& state,
                            bool training, BatchMoments* observed = nullptr);

// Simulated 8-bit affine quantization with a straight-through gradient inside
// the range and zero gradient outside it.
template <typename Real>
Var<Real> fake_quantize(Tape<Real>& tape, const Var<Real>& x,
                        const QuantRange& range);

// base^layer for layer in [1, num_layers]. Throws ConfigError otherwise.
double zoneout_schedule(double base, int layer, int num_layers);

// fo-pooling: c_t = f_t * c_{t-1} + (1 - f_t) * z_t with c_0 = 0 over
// [batch, T, S]. Masked timesteps carry the state and output zeros.
template <typename Real>
Var<Real> fo_pool(Tape<Real>& tape, const Var<Real>& z, const Var<Real>& f,
                  const Tensor<Real>& mask);

// Observations collected by a training forward pass; applied to the model
// once the step finishes.
struct StatUpdates {
  std::vector<std::pair<std::string, BatchMoments>> moments;
  std::vector<std::pair<std::string, QuantRange>> ranges;
};

// Non-trainable state: batch-norm running statistics and quantization ranges,
// keyed by the name of the layer that owns them.
struct EncoderStats {
  std::map<std::string, BatchNormState> batch_norm;
  std::map<std::string, QuantRange> quant;

  void apply(const StatUpdates& updates);
};

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;     // required for dropout/zoneout
  StatUpdates* updates = nullptr;     // training-mode observations
};

// Forget gate after zoneout. Training draws a Bernoulli(p) copy-state mask,
// inference applies the expectation p + (1 - p) * f. p == 0 returns f as is.
template <typename Real>
Var<Real> zoneout_forget_gate(Tape<Real>& tape, const Var<Real>& f, double p,
                              const ForwardContext& ctx);

enum class Direction { kForward, kBackward };

template <typename Real>
struct GateParams {
  Var<Real> kernel;  // [k, C_in, S]
  Var<Real> gamma;   // batch norm scale (batch_norm on)
  Var<Real> beta;    // batch norm shift (batch_norm on)
  Var<Real> bias;    // plain bias (batch_norm off)
  std::string name;
};

template <typename Real>
struct QrnnDirectionParams {
  GateParams<Real> z, f, o;
};

template <typename Real>
struct QrnnLayerParams {
  QrnnDirectionParams<Real> forward;
  QrnnDirectionParams<Real> backward;
  std::string name;
};

template <typename Real>
struct BottleneckParams {
  Var<Real> kernel;  // [N, B]
  Var<Real> bias;    // [B]
  Var<Real> gamma;
  Var<Real> beta;
  std::string name;
};

template <typename Real>
struct EncoderParams {
  BottleneckParams<Real> bottleneck;
  std::vector<QrnnLayerParams<Real>> layers;
};

// Registers every encoder parameter (Glorot weights, zero biases, unit BN
// scales) and the matching statistics entries.
template <typename Real>
EncoderParams<Real> build_encoder(ParameterSet<Real>& params,
                                  EncoderStats& stats, int feature_dim,
                                  const EncoderConfig& config,
                                  std::mt19937_64& rng);

// Re-binds handles to parameters already present in `params`.
template <typename Real>
EncoderParams<Real> bind_encoder(const ParameterSet<Real>& params,
                                 const EncoderConfig& config);

// Shared inputs of every layer in one forward pass.
template <typename Real>
struct SequenceBatch {
  Tensor<Real> mask;        // [batch, T]
  std::vector<int> lengths;
  Index batch = 0;
  Index steps = 0;
};

template <typename Real>
SequenceBatch<Real> make_sequence_batch(std::span<const int> lengths,
                                        Index steps);

template <typename Real>
Var<Real> bottleneck_forward(Tape<Real>& tape, const Var<Real>& x,
                             const BottleneckParams<Real>& params,
                             const SequenceBatch<Real>& seq,
                             const EncoderConfig& config,
                             const EncoderStats& stats,
                             const ForwardContext& ctx);

template <typename Real>
Var<Real> qrnn_layer_forward(Tape<Real>& tape, const Var<Real>& h,
                             const QrnnDirectionParams<Real>& params,
                             const SequenceBatch<Real>& seq, double zoneout_p,
                             Direction direction, const EncoderConfig& config,
                             const EncoderStats& stats,
                             const ForwardContext& ctx);

// Projection features -> O[batch, T, 2S].
template <typename Real>
Var<Real> pqrnn_encode(Tape<Real>& tape, const PaddedFeatures& features,
                       const EncoderParams<Real>& params,
                       const EncoderConfig& config, const EncoderStats& stats,
                       const ForwardContext& ctx);

// Fake-quantizes a weight tensor over its current min/max when quantization
// is on. Training records the range under `name`.
template <typename Real>
Var<Real> quantize_weight(Tape<Real>& tape, const Var<Real>& w,
                          const std::string& name, const EncoderConfig& config,
                          const ForwardContext& ctx);

// Fake-quantizes an activation through its moving-average range. Inference
// with a never-observed range passes the input through.
template <typename Real>
Var<Real> quantize_activation(Tape<Real>& tape, const Var<Real>& x,
                              const std::string& name,
                              const EncoderConfig& config,
                              const EncoderStats& stats,
                              const ForwardContext& ctx);

}  // namespace pqrnn

#endif  // PQRNN_ENCODER_H_
