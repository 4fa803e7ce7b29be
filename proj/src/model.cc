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

#include "pqrnn/model.h"

#include <algorithm>
#include <cmath>

#include "pqrnn/errors.h"
#include "pqrnn/ops.h"

namespace pqrnn {

void ModelConfig::validate() const {
  projection.validate();
  encoder.validate();
  if (num_intents < 1) throw ConfigError("model needs at least one intent");
  if (num_args < 1 || num_args % 2 != 1) {
    throw ConfigError("argument label count must be 2 * slot types + 1, got " +
                      std::to_string(num_args));
  }
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename Real>
int argmax_row(const Tensor<Real>& t, Index row) {
  const Index n = t.dim(-1);
  const Real* p = t.raw() + row * n;
  int best = 0;
  for (Index i = 1; i < n; ++i) {
    if (p[i] > p[best]) best = static_cast<int>(i);
  }
  return best;
}

void repair_bio_indices(std::vector<int>& labels) {
  int prev = 0;
  for (int& label : labels) {
    if (label > 0 && label % 2 == 0) {
      const int begin = label - 1;
      if (prev != begin && prev != label) label = begin;
    }
    prev = label;
  }
}

template <typename Real>
IntentHeadOutput<Real> intent_head(Tape<Real>& tape, const Var<Real>& encoded,
                                   const Tensor<Real>& mask,
                                   const HeadParams<Real>& head) {
  if (encoded->rank() != 3) {
    throw ShapeError("intent_head expects [batch x T x 2S], got " +
                     shape_string(encoded->shape()));
  }
  const Index batch = encoded->dim(0), steps = encoded->dim(1),
              width = encoded->dim(2);
  if (mask.size() != batch * steps) {
    throw ShapeError("intent_head: mask does not match encoder output");
  }
  for (Index b = 0; b < batch; ++b) {
    bool any = false;
    for (Index t = 0; t < steps; ++t) any |= mask[b * steps + t] != Real(0);
    if (!any) throw InputError("intent_head: sequence with no valid timestep");
  }
  IntentHeadOutput<Real> out;
  auto scores = matmul(tape, encoded, reshape(tape, head.pool, {width, 1}));
  Tensor<Real> mask2d = mask;
  mask2d.reshape_in_place({batch, steps});
  out.alpha = masked_softmax(tape, reshape(tape, scores, {batch, steps}), mask2d);
  out.pooled = weighted_time_sum(tape, encoded, out.alpha);
  out.logits = matmul(tape, out.pooled, head.intent);
  return out;
}

template <typename Real>
Var<Real> argument_head(Tape<Real>& tape, const Var<Real>& encoded,
                        const Tensor<Real>& delta, const HeadParams<Real>& head) {
  const Index batch = encoded->dim(0), steps = encoded->dim(1);
  const Index intents = head.intent_to_arg->dim(1);
  if (delta.rank() != 2 || delta.dim(0) != batch || delta.dim(1) != intents) {
    throw ShapeError("argument_head: delta " + shape_string(delta.shape()) +
                     " must be [batch x " + std::to_string(intents) + "]");
  }
  auto token_logits = matmul(tape, encoded, head.arg_kernel);
  auto bias = expand_leading(tape, head.arg_bias, {batch, steps});
  auto delta_var = std::make_shared<Tensor<Real>>(delta);
  auto intent_bias = matmul(tape, Var<Real>(delta_var),
                            transpose(tape, head.intent_to_arg));
  return add(tape, add(tape, token_logits, bias),
             expand_time(tape, intent_bias, steps));
}

template <typename Real>
PqrnnModel<Real> PqrnnModel<Real>::create(const ModelConfig& config,
                                          std::uint64_t seed) {
  config.validate();
  PqrnnModel model;
  model.config_ = config;
  std::mt19937_64 rng(seed);
  build_encoder(model.params_, model.stats_, config.projection.feature_dim,
                config.encoder, rng);
  const Index width = 2 * config.encoder.state_size;
  const Index intents = config.num_intents, args = config.num_args;
  auto& p = model.params_;
  glorot_uniform(*p.add("head/pool", {width}, true), width, 1, rng);
  glorot_uniform(*p.add("head/intent", {width, intents}, true), width, intents, rng);
  glorot_uniform(*p.add("head/arg/kernel", {width, args}, true), width, args, rng);
  p.add("head/arg/bias", {args}, true);
  glorot_uniform(*p.add("head/intent_to_arg", {args, intents}, true), intents,
                 args, rng);
  model.bind();
  return model;
}

template <typename Real>
PqrnnModel<Real>::PqrnnModel(ModelConfig config, ParameterSet<Real> params,
                             EncoderStats stats)
    : config_(std::move(config)),
      params_(std::move(params)),
      stats_(std::move(stats)) {
  config_.validate();
  // Compare against a reference layout so a checkpoint cannot smuggle in
  // tensors of the wrong shape.
  const auto reference = PqrnnModel<Real>::create(config_, 0);
  if (reference.params_.size() != params_.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(params_.size()) +
                          " tensors, model expects " +
                          std::to_string(reference.params_.size()));
  }
  for (const auto& p : reference.params_.all()) {
    if (!params_.contains(p.name)) {
      throw CheckpointError("checkpoint is missing tensor " + p.name);
    }
    if (params_.get(p.name)->shape() != p.value->shape()) {
      throw CheckpointError("tensor " + p.name + " has shape " +
                            shape_string(params_.get(p.name)->shape()) +
                            ", expected " + shape_string(p.value->shape()));
    }
  }
  for (const auto& [name, state] : reference.stats_.batch_norm) {
    auto it = stats_.batch_norm.find(name);
    if (it == stats_.batch_norm.end() || it->second.channels() != state.channels()) {
      throw CheckpointError("checkpoint batch norm state " + name +
                            " is missing or has the wrong size");
    }
  }
  bind();
}

template <typename Real>
void PqrnnModel<Real>::bind() {
  encoder_ = bind_encoder(params_, config_.encoder);
  head_.pool = params_.get("head/pool");
  head_.intent = params_.get("head/intent");
  head_.arg_kernel = params_.get("head/arg/kernel");
  head_.arg_bias = params_.get("head/arg/bias");
  head_.intent_to_arg = params_.get("head/intent_to_arg");
}

template <typename Real>
PqrnnModel<Real> PqrnnModel<Real>::clone() const {
  PqrnnModel copy;
  copy.config_ = config_;
  copy.params_ = params_.clone();
  copy.stats_ = stats_;
  copy.bind();
  return copy;
}

template <typename Real>
typename PqrnnModel<Real>::Outputs PqrnnModel<Real>::forward(
    Tape<Real>& tape, const PaddedFeatures& features,
    std::span<const int> forced_intents, const ForwardContext& ctx) const {
  if (features.dim != config_.projection.feature_dim) {
    throw ShapeError("features have width " + std::to_string(features.dim) +
                     ", model expects " +
                     std::to_string(config_.projection.feature_dim));
  }
  if (!forced_intents.empty() &&
      static_cast<int>(forced_intents.size()) != features.batch) {
    throw ShapeError("forced intents must have one entry per sequence");
  }
  const auto& enc = config_.encoder;
  Outputs out;
  out.seq = make_sequence_batch<Real>(features.lengths, features.steps);
  out.encoded = pqrnn_encode(tape, features, encoder_, enc, stats_, ctx);

  HeadParams<Real> head = head_;
  head.pool = quantize_weight(tape, head_.pool, "head/pool", enc, ctx);
  head.intent = quantize_weight(tape, head_.intent, "head/intent", enc, ctx);
  head.arg_kernel = quantize_weight(tape, head_.arg_kernel, "head/arg/kernel", enc, ctx);
  head.intent_to_arg =
      quantize_weight(tape, head_.intent_to_arg, "head/intent_to_arg", enc, ctx);

  out.intent = intent_head(tape, out.encoded, out.seq.mask, head);
  const Index batch = features.batch, intents = config_.num_intents;
  out.delta = Tensor<Real>({batch, intents});
  for (Index b = 0; b < batch; ++b) {
    int chosen = forced_intents.empty() ? -1 : forced_intents[b];
    if (chosen >= intents) {
      throw ShapeError("forced intent " + std::to_string(chosen) +
                       " out of range for " + std::to_string(intents) +
                       " intents");
    }
    if (chosen < 0) chosen = argmax_row(*out.intent.logits, b);
    out.delta[b * intents + chosen] = Real(1);
  }
  out.arg_logits = argument_head(tape, out.encoded, out.delta, head);
  return out;
}

namespace {

std::vector<double> softmax_row(const double* logits, Index n) {
  std::vector<double> p(logits, logits + n);
  const double hi = *std::max_element(p.begin(), p.end());
  double total = 0;
  for (double& v : p) {
    v = std::exp(v - hi);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

template <typename Real>
std::vector<ParseOutput> decode(const typename PqrnnModel<Real>::Outputs& out,
                                std::span<const int> lengths) {
  const Index batch = out.intent.logits->dim(0);
  const Index intents = out.intent.logits->dim(1);
  const Index steps = out.arg_logits->dim(1), args = out.arg_logits->dim(2);
  std::vector<ParseOutput> parses(batch);
  std::vector<double> row;
  for (Index b = 0; b < batch; ++b) {
    ParseOutput& p = parses[b];
    row.assign(out.intent.logits->raw() + b * intents,
               out.intent.logits->raw() + (b + 1) * intents);
    p.intent_probs = softmax_row(row.data(), intents);
    for (Index i = 0; i < intents; ++i) {
      if (out.delta[b * intents + i] != Real(0)) p.intent = static_cast<int>(i);
    }
    for (int t = 0; t < lengths[b]; ++t) {
      const Real* src = out.arg_logits->raw() + (b * steps + t) * args;
      row.assign(src, src + args);
      p.arg_probs.push_back(softmax_row(row.data(), args));
      p.slots.push_back(argmax(p.arg_probs.back()));
    }
    repair_bio_indices(p.slots);
  }
  return parses;
}

}  // namespace

double ParseOutput::joint_probability() const {
  double p = intent_probs.at(intent);
  for (std::size_t t = 0; t < slots.size(); ++t) p *= arg_probs[t][slots[t]];
  return p;
}

template <typename Real>
std::vector<ParseOutput> parse_batch(const PqrnnModel<Real>& model,
                                     const PaddedFeatures& features) {
  Tape<Real> tape(false);
  const auto out = model.forward(tape, features, {}, ForwardContext{});
  return decode<Real>(out, features.lengths);
}

template <typename Real>
ParseOutput joint_forward(const PqrnnModel<Real>& model,
                          const std::vector<std::string>& tokens,
                          std::optional<int> intent_label, bool training,
                          std::mt19937_64* rng) {
  if (training && !intent_label) {
    throw InputError("joint_forward: training needs the gold intent label");
  }
  const ProjectedSequence seq = project_sequence(tokens, model.config().projection);
  const ProjectedSequence* one[] = {&seq};
  const PaddedFeatures features = pad_sequences(one);
  ForwardContext ctx;
  ctx.training = training;
  ctx.rng = rng;
  Tape<Real> tape(false);
  std::vector<int> forced;
  if (training) forced.push_back(*intent_label);
  const auto out = model.forward(tape, features, forced, ctx);
  return decode<Real>(out, features.lengths).front();
}

Index param_count(const ModelConfig& config) {
  const Index n = config.projection.feature_dim;
  const auto& e = config.encoder;
  const Index b = e.bottleneck_dim, s = e.state_size, k = e.kernel_width;
  const Index intents = config.num_intents, args = config.num_args;
  Index total = n * b + b + (e.batch_norm ? 2 * b : 0);
  for (int l = 1; l <= e.num_layers; ++l) {
    const Index c_in = l == 1 ? b : 2 * s;
    const Index per_gate = k * c_in * s + (e.batch_norm ? 2 * s : s);
    total += 2 * 3 * per_gate;
  }
  total += 2 * s + 2 * s * intents + 2 * s * args + args + args * intents;
  return total;
}

#define PQRNN_INSTANTIATE_MODEL(Real)                                          \
  template class PqrnnModel<Real>;                                             \
  template int argmax_row(const Tensor<Real>&, Index);                         \
  template IntentHeadOutput<Real> intent_head(                                 \
      Tape<Real>&, const Var<Real>&, const Tensor<Real>&,                      \
      const HeadParams<Real>&);                                                \
  template Var<Real> argument_head(Tape<Real>&, const Var<Real>&,              \
                                   const Tensor<Real>&,                        \
                                   const HeadParams<Real>&);                   \
  template std::vector<ParseOutput> parse_batch(const PqrnnModel<Real>&,       \
                                                const PaddedFeatures&);        \
  template ParseOutput joint_forward(const PqrnnModel<Real>&,                  \
                                     const std::vector<std::string>&,          \
                                     std::optional<int>, bool,                 \
                                     std::mt19937_64*);

PQRNN_INSTANTIATE_MODEL(float)
PQRNN_INSTANTIATE_MODEL(double)

#undef PQRNN_INSTANTIATE_MODEL

}  // namespace pqrnn
