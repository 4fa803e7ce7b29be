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

#include "pqrnn/encoder.h"

#include <algorithm>
#include <cmath>

#include "pqrnn/errors.h"
#include "pqrnn/ops.h"

namespace pqrnn {

void EncoderConfig::validate() const {
  if (bottleneck_dim <= 0 || state_size <= 0 || num_layers <= 0 ||
      kernel_width <= 0) {
    throw ConfigError("encoder dimensions must all be > 0");
  }
  auto probability = [](double p, const char* what) {
    if (!(p >= 0.0 && p < 1.0)) {
      throw ConfigError(std::string("encoder ") + what + " must lie in [0, 1)");
    }
  };
  probability(zoneout_base, "zoneout_base");
  probability(projection_dropout, "projection_dropout");
  probability(bn_momentum, "bn_momentum");
  probability(quant_momentum, "quant_momentum");
  if (!(bn_epsilon > 0)) throw ConfigError("encoder bn_epsilon must be > 0");
}

BatchNormState::BatchNormState(int channels, double momentum, double epsilon)
    : running_mean(channels, 0.0),
      running_var(channels, 1.0),
      momentum(momentum),
      epsilon(epsilon) {}

void BatchNormState::update(const BatchMoments& observed) {
  if (observed.mean.size() != running_mean.size()) {
    throw ShapeError("batch norm update with mismatched channel count");
  }
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = momentum * running_mean[c] + (1 - momentum) * observed.mean[c];
    running_var[c] = momentum * running_var[c] + (1 - momentum) * observed.var[c];
  }
}

void QuantRange::observe(double lo_value, double hi_value, double momentum) {
  if (!initialized) {
    min = lo_value;
    max = hi_value;
    initialized = true;
    return;
  }
  min = momentum * min + (1 - momentum) * lo_value;
  max = momentum * max + (1 - momentum) * hi_value;
}

double QuantRange::scale() const {
  const double levels = static_cast<double>((1 << bits) - 1);
  const double width = hi() - lo();
  return width > 0 ? width / levels : 1.0;
}

int QuantRange::zero_point() const {
  const int levels = (1 << bits) - 1;
  const double zp = std::round(-lo() / scale());
  return static_cast<int>(std::clamp(zp, 0.0, static_cast<double>(levels)));
}

void EncoderStats::apply(const StatUpdates& updates) {
  for (const auto& [name, moments] : updates.moments) {
    batch_norm.at(name).update(moments);
  }
  for (const auto& [name, range] : updates.ranges) quant[name] = range;
}

template <typename Real>
BatchMoments masked_moments(const Tensor<Real>& x, const Tensor<Real>& mask) {
  if (x.rank() < 1 || mask.size() == 0 || x.size() % mask.size() != 0) {
    throw ShapeError("masked_moments: mask " + shape_string(mask.shape()) +
                     " does not tile " + shape_string(x.shape()));
  }
  const Index rows = mask.size();
  const Index c = x.size() / rows;
  BatchMoments m{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  Index n = 0;
  for (Index r = 0; r < rows; ++r) {
    if (mask[r] == Real(0)) continue;
    ++n;
    for (Index j = 0; j < c; ++j) m.mean[j] += x[r * c + j];
  }
  if (n == 0) throw InputError("masked batch norm: no valid positions in batch");
  for (double& v : m.mean) v /= static_cast<double>(n);
  for (Index r = 0; r < rows; ++r) {
    if (mask[r] == Real(0)) continue;
    for (Index j = 0; j < c; ++j) {
      const double d = x[r * c + j] - m.mean[j];
      m.var[j] += d * d;
    }
  }
  for (double& v : m.var) v /= static_cast<double>(n);
  return m;
}

template <typename Real>
Var<Real> masked_batch_norm(Tape<Real>& tape, const Var<Real>& x,
                            const Tensor<Real>& mask, const Var<Real>& gamma,
                            const Var<Real>& beta, const BatchNormState& state,
                            bool training, BatchMoments* observed) {
  const Index c = x->dim(-1);
  if (gamma->size() != c || beta->size() != c || state.channels() != c) {
    throw ShapeError("masked_batch_norm: " + std::to_string(c) +
                     " channels but scale/shift/state sized " +
                     std::to_string(gamma->size()) + "/" +
                     std::to_string(beta->size()) + "/" +
                     std::to_string(state.channels()));
  }
  if (mask.size() * c != x->size()) {
    throw ShapeError("masked_batch_norm: mask " + shape_string(mask.shape()) +
                     " does not match " + shape_string(x->shape()));
  }
  const Index rows = mask.size();
  std::vector<double> mean(c), inv_std(c);
  Index count = 0;
  if (training) {
    BatchMoments m = masked_moments(*x, mask);
    for (Index j = 0; j < c; ++j) {
      mean[j] = m.mean[j];
      inv_std[j] = 1.0 / std::sqrt(m.var[j] + state.epsilon);
    }
    for (Index r = 0; r < rows; ++r) count += mask[r] != Real(0);
    if (observed) *observed = std::move(m);
  } else {
    for (Index j = 0; j < c; ++j) {
      mean[j] = state.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    }
  }
  const bool tracked = tape.tracks({&x, &gamma, &beta});
  auto out = std::make_shared<Tensor<Real>>(x->shape());
  if (tracked) out->set_requires_grad(true);
  auto xhat = std::make_shared<std::vector<Real>>(x->size(), Real(0));
  auto valid = std::make_shared<std::vector<bool>>(rows);
  for (Index r = 0; r < rows; ++r) {
    (*valid)[r] = mask[r] != Real(0);
    if (!(*valid)[r]) continue;
    for (Index j = 0; j < c; ++j) {
      const Index i = r * c + j;
      const Real h = static_cast<Real>(((*x)[i] - mean[j]) * inv_std[j]);
      (*xhat)[i] = h;
      (*out)[i] = (*gamma)[j] * h + (*beta)[j];
    }
  }
  if (tracked) {
    tape.record(out, [x, gamma, beta, out, xhat, valid, inv_std, rows, c,
                      count, training] {
      const Real* g = out->grad().data();
      std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
      for (Index r = 0; r < rows; ++r) {
        if (!(*valid)[r]) continue;
        for (Index j = 0; j < c; ++j) {
          sum_dy[j] += g[r * c + j];
          sum_dy_xhat[j] += g[r * c + j] * (*xhat)[r * c + j];
        }
      }
      if (gamma->requires_grad()) {
        for (Index j = 0; j < c; ++j) gamma->grad()[j] += static_cast<Real>(sum_dy_xhat[j]);
      }
      if (beta->requires_grad()) {
        for (Index j = 0; j < c; ++j) beta->grad()[j] += static_cast<Real>(sum_dy[j]);
      }
      if (!x->requires_grad()) return;
      Real* gx = x->grad().data();
      for (Index r = 0; r < rows; ++r) {
        if (!(*valid)[r]) continue;
        for (Index j = 0; j < c; ++j) {
          const Index i = r * c + j;
          const double scale = (*gamma)[j] * inv_std[j];
          if (training) {
            const double n = static_cast<double>(count);
            gx[i] += static_cast<Real>(
                scale * (g[i] - sum_dy[j] / n - (*xhat)[i] * sum_dy_xhat[j] / n));
          } else {
            gx[i] += static_cast<Real>(scale * g[i]);
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> fake_quantize(Tape<Real>& tape, const Var<Real>& x,
                        const QuantRange& range) {
  const double lo = range.lo(), hi = range.hi();
  const double scale = range.scale();
  const double zp = range.zero_point();
  const double levels = static_cast<double>((1 << range.bits) - 1);
  const bool tracked = tape.tracks({&x});
  auto out = std::make_shared<Tensor<Real>>(x->shape());
  if (tracked) out->set_requires_grad(true);
  const Index n = x->size();
  for (Index i = 0; i < n; ++i) {
    const double q = std::clamp(std::round((*x)[i] / scale) + zp, 0.0, levels);
    (*out)[i] = static_cast<Real>((q - zp) * scale);
  }
  if (tracked) {
    tape.record(out, [x, out, lo, hi, n] {
      const Real* g = out->grad().data();
      Real* gx = x->grad().data();
      for (Index i = 0; i < n; ++i) {
        const double v = (*x)[i];
        if (v >= lo && v <= hi) gx[i] += g[i];
      }
    });
  }
  return out;
}

double zoneout_schedule(double base, int layer, int num_layers) {
  if (layer < 1 || layer > num_layers) {
    throw ConfigError("zoneout layer index " + std::to_string(layer) +
                      " outside [1, " + std::to_string(num_layers) + "]");
  }
  if (!(base >= 0.0 && base < 1.0)) {
    throw ConfigError("zoneout base probability must lie in [0, 1)");
  }
  return std::pow(base, layer);
}

template <typename Real>
Var<Real> fo_pool(Tape<Real>& tape, const Var<Real>& z, const Var<Real>& f,
                  const Tensor<Real>& mask) {
  if (z->shape() != f->shape() || z->rank() != 3) {
    throw ShapeError("fo_pool: z " + shape_string(z->shape()) + " and f " +
                     shape_string(f->shape()) + " must be equal [batch x T x S]");
  }
  const Index batch = z->dim(0), steps = z->dim(1), s = z->dim(2);
  if (mask.size() != batch * steps) {
    throw ShapeError("fo_pool: mask " + shape_string(mask.shape()) +
                     " does not match " + shape_string(z->shape()));
  }
  const bool tracked = tape.tracks({&z, &f});
  auto out = std::make_shared<Tensor<Real>>(z->shape());
  if (tracked) out->set_requires_grad(true);
  // Carried state per timestep, including copies through masked steps.
  auto state = std::make_shared<std::vector<Real>>(z->size(), Real(0));
  auto valid = std::make_shared<std::vector<bool>>(batch * steps);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < steps; ++t) {
      const Index row = b * steps + t;
      const bool ok = mask[row] != Real(0);
      (*valid)[row] = ok;
      for (Index j = 0; j < s; ++j) {
        const Index i = row * s + j;
        const Real prev = t > 0 ? (*state)[i - s] : Real(0);
        if (ok) {
          const Real fv = (*f)[i];
          (*state)[i] = fv * prev + (Real(1) - fv) * (*z)[i];
          (*out)[i] = (*state)[i];
        } else {
          (*state)[i] = prev;
        }
      }
    }
  }
  if (tracked) {
    tape.record(out, [z, f, out, state, valid, batch, steps, s] {
      const Real* g = out->grad().data();
      std::vector<Real> carry(s);
      for (Index b = 0; b < batch; ++b) {
        std::fill(carry.begin(), carry.end(), Real(0));
        for (Index t = steps - 1; t >= 0; --t) {
          const Index row = b * steps + t;
          for (Index j = 0; j < s; ++j) {
            const Index i = row * s + j;
            if (!(*valid)[row]) continue;  // state passes through unchanged
            const Real dc = carry[j] + g[i];
            const Real prev = t > 0 ? (*state)[i - s] : Real(0);
            const Real fv = (*f)[i];
            if (z->requires_grad()) z->grad()[i] += dc * (Real(1) - fv);
            if (f->requires_grad()) f->grad()[i] += dc * (prev - (*z)[i]);
            carry[j] = dc * fv;
          }
        }
      }
    });
  }
  return out;
}

template <typename Real>
Var<Real> zoneout_forget_gate(Tape<Real>& tape, const Var<Real>& f, double p,
                              const ForwardContext& ctx) {
  if (p == 0.0) return f;
  if (!ctx.training) {
    return affine(tape, f, static_cast<Real>(1 - p), static_cast<Real>(p));
  }
  if (!ctx.rng) throw InputError("zoneout in training mode needs an rng");
  auto keep = std::make_shared<Tensor<Real>>(f->shape());
  std::bernoulli_distribution zone(p);
  for (Real& v : keep->data()) v = zone(*ctx.rng) ? Real(0) : Real(1);
  // f' = 1 - (1 - f) * keep: a zoned-out unit copies its previous state.
  auto open = affine(tape, f, Real(-1), Real(1));
  return affine(tape, mul(tape, open, Var<Real>(keep)), Real(-1), Real(1));
}

namespace {

template <typename Real>
GateParams<Real> add_gate(ParameterSet<Real>& params, EncoderStats& stats,
                          const std::string& name, Index c_in,
                          const EncoderConfig& config, std::mt19937_64& rng) {
  const Index k = config.kernel_width, s = config.state_size;
  GateParams<Real> gate;
  gate.name = name;
  gate.kernel = params.add(name + "/kernel", {k, c_in, s}, true);
  glorot_uniform(*gate.kernel, k * c_in, s, rng);
  if (config.batch_norm) {
    gate.gamma = params.add(name + "/bn/gamma", {s}, false);
    std::fill(gate.gamma->data().begin(), gate.gamma->data().end(), Real(1));
    gate.beta = params.add(name + "/bn/beta", {s}, false);
    stats.batch_norm[name + "/bn"] = BatchNormState(
        static_cast<int>(s), config.bn_momentum, config.bn_epsilon);
  } else {
    gate.bias = params.add(name + "/bias", {s}, true);
  }
  return gate;
}

template <typename Real>
GateParams<Real> bind_gate(const ParameterSet<Real>& params,
                           const std::string& name, const EncoderConfig& config) {
  GateParams<Real> gate;
  gate.name = name;
  gate.kernel = params.get(name + "/kernel");
  if (config.batch_norm) {
    gate.gamma = params.get(name + "/bn/gamma");
    gate.beta = params.get(name + "/bn/beta");
  } else {
    gate.bias = params.get(name + "/bias");
  }
  return gate;
}

std::string layer_name(int layer) { return "qrnn/l" + std::to_string(layer); }

const char* direction_name(Direction d) {
  return d == Direction::kForward ? "fwd" : "bwd";
}

template <typename Real>
Var<Real> normalize_gate(Tape<Real>& tape, const Var<Real>& pre,
                         const GateParams<Real>& gate,
                         const SequenceBatch<Real>& seq,
                         const EncoderConfig& config, const EncoderStats& stats,
                         const ForwardContext& ctx) {
  if (!config.batch_norm) {
    auto biased = add(tape, pre, expand_leading(tape, gate.bias, {seq.batch, seq.steps}));
    return mask_rows(tape, biased, seq.mask);
  }
  const std::string key = gate.name + "/bn";
  BatchMoments moments;
  auto out = masked_batch_norm(tape, pre, seq.mask, gate.gamma, gate.beta,
                               stats.batch_norm.at(key), ctx.training,
                               ctx.training ? &moments : nullptr);
  if (ctx.training && ctx.updates) {
    ctx.updates->moments.emplace_back(key, std::move(moments));
  }
  return out;
}

}  // namespace

template <typename Real>
EncoderParams<Real> build_encoder(ParameterSet<Real>& params,
                                  EncoderStats& stats, int feature_dim,
                                  const EncoderConfig& config,
                                  std::mt19937_64& rng) {
  config.validate();
  EncoderParams<Real> enc;
  const Index n = feature_dim, b = config.bottleneck_dim;
  auto& bn = enc.bottleneck;
  bn.name = "bottleneck";
  bn.kernel = params.add("bottleneck/kernel", {n, b}, true);
  glorot_uniform(*bn.kernel, n, b, rng);
  bn.bias = params.add("bottleneck/bias", {b}, true);
  if (config.batch_norm) {
    bn.gamma = params.add("bottleneck/bn/gamma", {b}, false);
    std::fill(bn.gamma->data().begin(), bn.gamma->data().end(), Real(1));
    bn.beta = params.add("bottleneck/bn/beta", {b}, false);
    stats.batch_norm["bottleneck/bn"] =
        BatchNormState(static_cast<int>(b), config.bn_momentum, config.bn_epsilon);
  }
  for (int l = 1; l <= config.num_layers; ++l) {
    const Index c_in = l == 1 ? b : 2 * config.state_size;
    QrnnLayerParams<Real> layer;
    layer.name = layer_name(l);
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      const std::string prefix = layer.name + "/" + direction_name(d);
      auto& dir = d == Direction::kForward ? layer.forward : layer.backward;
      dir.z = add_gate(params, stats, prefix + "/z", c_in, config, rng);
      dir.f = add_gate(params, stats, prefix + "/f", c_in, config, rng);
      dir.o = add_gate(params, stats, prefix + "/o", c_in, config, rng);
    }
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

template <typename Real>
EncoderParams<Real> bind_encoder(const ParameterSet<Real>& params,
                                 const EncoderConfig& config) {
  EncoderParams<Real> enc;
  auto& bn = enc.bottleneck;
  bn.name = "bottleneck";
  bn.kernel = params.get("bottleneck/kernel");
  bn.bias = params.get("bottleneck/bias");
  if (config.batch_norm) {
    bn.gamma = params.get("bottleneck/bn/gamma");
    bn.beta = params.get("bottleneck/bn/beta");
  }
  for (int l = 1; l <= config.num_layers; ++l) {
    QrnnLayerParams<Real> layer;
    layer.name = layer_name(l);
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      const std::string prefix = layer.name + "/" + direction_name(d);
      auto& dir = d == Direction::kForward ? layer.forward : layer.backward;
      dir.z = bind_gate(params, prefix + "/z", config);
      dir.f = bind_gate(params, prefix + "/f", config);
      dir.o = bind_gate(params, prefix + "/o", config);
    }
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

template <typename Real>
SequenceBatch<Real> make_sequence_batch(std::span<const int> lengths,
                                        Index steps) {
  SequenceBatch<Real> seq;
  seq.batch = static_cast<Index>(lengths.size());
  seq.steps = steps;
  seq.lengths.assign(lengths.begin(), lengths.end());
  seq.mask = Tensor<Real>({seq.batch, steps});
  for (Index b = 0; b < seq.batch; ++b) {
    if (lengths[b] < 1 || lengths[b] > steps) {
      throw InputError("sequence length " + std::to_string(lengths[b]) +
                       " outside [1, " + std::to_string(steps) + "]");
    }
    for (Index t = 0; t < lengths[b]; ++t) seq.mask[b * steps + t] = Real(1);
  }
  return seq;
}

template <typename Real>
Var<Real> quantize_weight(Tape<Real>& tape, const Var<Real>& w,
                          const std::string& name, const EncoderConfig& config,
                          const ForwardContext& ctx) {
  if (!config.quantize) return w;
  const auto [lo, hi] = std::minmax_element(w->data().begin(), w->data().end());
  QuantRange range;
  range.observe(*lo, *hi, 0.0);
  if (ctx.training && ctx.updates) ctx.updates->ranges.emplace_back(name, range);
  return fake_quantize(tape, w, range);
}

template <typename Real>
Var<Real> quantize_activation(Tape<Real>& tape, const Var<Real>& x,
                              const std::string& name,
                              const EncoderConfig& config,
                              const EncoderStats& stats,
                              const ForwardContext& ctx) {
  if (!config.quantize) return x;
  QuantRange range;
  if (auto it = stats.quant.find(name); it != stats.quant.end()) range = it->second;
  if (ctx.training) {
    const auto [lo, hi] = std::minmax_element(x->data().begin(), x->data().end());
    range.observe(*lo, *hi, config.quant_momentum);
    if (ctx.updates) ctx.updates->ranges.emplace_back(name, range);
  } else if (!range.initialized) {
    return x;
  }
  return fake_quantize(tape, x, range);
}

template <typename Real>
Var<Real> bottleneck_forward(Tape<Real>& tape, const Var<Real>& x,
                             const BottleneckParams<Real>& params,
                             const SequenceBatch<Real>& seq,
                             const EncoderConfig& config,
                             const EncoderStats& stats,
                             const ForwardContext& ctx) {
  if (params.kernel->rank() != 2 || x->dim(-1) != params.kernel->dim(0)) {
    throw ShapeError("bottleneck kernel " + shape_string(params.kernel->shape()) +
                     " does not fit input " + shape_string(x->shape()));
  }
  Var<Real> input = x;
  const double p = config.projection_dropout;
  if (ctx.training && p > 0) {
    if (!ctx.rng) throw InputError("projection dropout needs an rng");
    auto keep = std::make_shared<Tensor<Real>>(x->shape());
    std::bernoulli_distribution drop(p);
    const Real survive = static_cast<Real>(1.0 / (1.0 - p));
    for (Real& v : keep->data()) v = drop(*ctx.rng) ? Real(0) : survive;
    input = mul(tape, x, Var<Real>(keep));
  }
  auto kernel = quantize_weight(tape, params.kernel, params.name + "/kernel", config, ctx);
  auto pre = add(tape, matmul(tape, input, kernel),
                 expand_leading(tape, params.bias, {seq.batch, seq.steps}));
  Var<Real> normed;
  if (config.batch_norm) {
    BatchMoments moments;
    normed = masked_batch_norm(tape, pre, seq.mask, params.gamma, params.beta,
                               stats.batch_norm.at(params.name + "/bn"),
                               ctx.training, ctx.training ? &moments : nullptr);
    if (ctx.training && ctx.updates) {
      ctx.updates->moments.emplace_back(params.name + "/bn", std::move(moments));
    }
  } else {
    normed = mask_rows(tape, pre, seq.mask);
  }
  return quantize_activation(tape, relu(tape, normed), params.name + "/output",
                             config, stats, ctx);
}

template <typename Real>
Var<Real> qrnn_layer_forward(Tape<Real>& tape, const Var<Real>& h,
                             const QrnnDirectionParams<Real>& params,
                             const SequenceBatch<Real>& seq, double zoneout_p,
                             Direction direction, const EncoderConfig& config,
                             const EncoderStats& stats,
                             const ForwardContext& ctx) {
  if (h->rank() != 3 || h->dim(0) != seq.batch || h->dim(1) != seq.steps) {
    throw ShapeError("qrnn layer input " + shape_string(h->shape()) +
                     " does not match batch of " + std::to_string(seq.batch) +
                     " x " + std::to_string(seq.steps));
  }
  const bool reversed = direction == Direction::kBackward;
  Var<Real> input = reversed ? reverse_sequences(tape, h, seq.lengths) : h;
  auto gate = [&](const GateParams<Real>& g) {
    auto kernel = quantize_weight(tape, g.kernel, g.name + "/kernel", config, ctx);
    return normalize_gate(tape, conv1d_time(tape, input, kernel, seq.mask), g,
                          seq, config, stats, ctx);
  };
  auto z = tanh(tape, gate(params.z));
  auto f = sigmoid(tape, gate(params.f));
  auto o = sigmoid(tape, gate(params.o));
  f = zoneout_forget_gate(tape, f, zoneout_p, ctx);
  auto out = mul(tape, o, fo_pool(tape, z, f, seq.mask));
  return reversed ? reverse_sequences(tape, out, seq.lengths) : out;
}

template <typename Real>
Var<Real> pqrnn_encode(Tape<Real>& tape, const PaddedFeatures& features,
                       const EncoderParams<Real>& params,
                       const EncoderConfig& config, const EncoderStats& stats,
                       const ForwardContext& ctx) {
  const auto seq = make_sequence_batch<Real>(features.lengths, features.steps);
  std::vector<Real> values(features.values.begin(), features.values.end());
  auto x = make_var<Real>({seq.batch, seq.steps, features.dim}, std::move(values));
  auto h = bottleneck_forward(tape, x, params.bottleneck, seq, config, stats, ctx);
  const int num_layers = static_cast<int>(params.layers.size());
  for (int l = 0; l < num_layers; ++l) {
    const auto& layer = params.layers[l];
    const double p = zoneout_schedule(config.zoneout_base, l + 1, num_layers);
    auto fwd = qrnn_layer_forward(tape, h, layer.forward, seq, p,
                                  Direction::kForward, config, stats, ctx);
    auto bwd = qrnn_layer_forward(tape, h, layer.backward, seq, p,
                                  Direction::kBackward, config, stats, ctx);
    h = quantize_activation(tape, concat_last(tape, fwd, bwd),
                            layer.name + "/output", config, stats, ctx);
  }
  return h;
}

#define PQRNN_INSTANTIATE_ENCODER(Real)                                        \
  template BatchMoments masked_moments(const Tensor<Real>&,                    \
                                       const Tensor<Real>&);                   \
  template Var<Real> masked_batch_norm(                                        \
      Tape<Real>&, const Var<Real>&, const Tensor<Real>&, const Var<Real>&,    \
      const Var<Real>&, const BatchNormState&, bool, BatchMoments*);           \
  template Var<Real> fake_quantize(Tape<Real>&, const Var<Real>&,              \
                                   const QuantRange&);                         \
  template Var<Real> fo_pool(Tape<Real>&, const Var<Real>&, const Var<Real>&,  \
                             const Tensor<Real>&);                             \
  template Var<Real> zoneout_forget_gate(Tape<Real>&, const Var<Real>&,        \
                                         double, const ForwardContext&);       \
  template EncoderParams<Real> build_encoder(ParameterSet<Real>&,              \
                                             EncoderStats&, int,               \
                                             const EncoderConfig&,             \
                                             std::mt19937_64&);                \
  template EncoderParams<Real> bind_encoder(const ParameterSet<Real>&,         \
                                            const EncoderConfig&);             \
  template SequenceBatch<Real> make_sequence_batch(std::span<const int>,       \
                                                   Index);                     \
  template Var<Real> quantize_weight(Tape<Real>&, const Var<Real>&,            \
                                     const std::string&, const EncoderConfig&, \
                                     const ForwardContext&);                   \
  template Var<Real> quantize_activation(                                      \
      Tape<Real>&, const Var<Real>&, const std::string&, const EncoderConfig&, \
      const EncoderStats&, const ForwardContext&);                             \
  template Var<Real> bottleneck_forward(                                       \
      Tape<Real>&, const Var<Real>&, const BottleneckParams<Real>&,            \
      const SequenceBatch<Real>&, const EncoderConfig&, const EncoderStats&,   \
      const ForwardContext&);                                                  \
  template Var<Real> qrnn_layer_forward(                                       \
      Tape<Real>&, const Var<Real>&, const QrnnDirectionParams<Real>&,         \
      const SequenceBatch<Real>&, double, Direction, const EncoderConfig&,     \
      const EncoderStats&, const ForwardContext&);                             \
  template Var<Real> pqrnn_encode(Tape<Real>&, const PaddedFeatures&,          \
                                  const EncoderParams<Real>&,                  \
                                  const EncoderConfig&, const EncoderStats&,   \
                                  const ForwardContext&);

PQRNN_INSTANTIATE_ENCODER(float)
PQRNN_INSTANTIATE_ENCODER(double)

#undef PQRNN_INSTANTIATE_ENCODER

}  // namespace pqrnn
