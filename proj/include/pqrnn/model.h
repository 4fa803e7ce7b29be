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

// Joint intent / argument model on top of the pQRNN encoder.
//
// The joint distribution factors as P(i, a_1:T | q) = P(a_1:T | i, q) P(i | q).
//
//   intent:    alpha = softmax_t(O_t . w_pool) over valid steps,
//              P(i | q) = softmax((sum_t alpha_t O_t) W_intent)
//   arguments: P(a_t | i, q) = softmax(O_t W_arg + b_arg + W delta_i)
//
// delta_i is the gold intent one-hot during training (teacher forcing) and
// the one-hot of the most likely intent at inference.

#ifndef PQRNN_MODEL_H_
#define PQRNN_MODEL_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pqrnn/encoder.h"
#include "pqrnn/params.h"
#include "pqrnn/projection.h"
#include "pqrnn/tensor.h"

namespace pqrnn {

struct ModelConfig {
  ProjectionConfig projection;
  EncoderConfig encoder;
  int num_intents = 0;  // I
  int num_args = 0;     // A (BIO labels, "O" first)

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename Real>
struct HeadParams {
  Var<Real> pool;           // [2S]
  Var<Real> intent;         // [2S, I]
  Var<Real> arg_kernel;     // [2S, A]
  Var<Real> arg_bias;       // [A]
  Var<Real> intent_to_arg;  // [A, I]
};

template <typename Real>
struct IntentHeadOutput {
  Var<Real> alpha;   // [batch, T] attention weights
  Var<Real> pooled;  // [batch, 2S]
  Var<Real> logits;  // [batch, I]
};

template <typename Real>
IntentHeadOutput<Real> intent_head(Tape<Real>& tape, const Var<Real>& encoded,
                                   const Tensor<Real>& mask,
                                   const HeadParams<Real>& head);

// `delta` is [batch, I], each row a distribution over intents. Returns
// argument logits [batch, T, A].
template <typename Real>
Var<Real> argument_head(Tape<Real>& tape, const Var<Real>& encoded,
                        const Tensor<Real>& delta, const HeadParams<Real>& head);

// Lowest index wins on ties.
int argmax(std::span<const double> values);
template <typename Real>
int argmax_row(const Tensor<Real>& t, Index row);

// Rewrites an inside tag whose predecessor is neither B-x nor I-x into B-x.
// Argument index layout: 0 = O, 2k+1 = B-type_k, 2k+2 = I-type_k.
void repair_bio_indices(std::vector<int>& labels);

template <typename Real>
class PqrnnModel {
 public:
  // Freshly initialized parameters.
  static PqrnnModel create(const ModelConfig& config, std::uint64_t seed);

  // Adopts parameters and statistics loaded from storage; throws
  // CheckpointError if a tensor is missing or has the wrong shape.
  PqrnnModel(ModelConfig config, ParameterSet<Real> params, EncoderStats stats);

  const ModelConfig& config() const { return config_; }
  ParameterSet<Real>& params() { return params_; }
  const ParameterSet<Real>& params() const { return params_; }
  EncoderStats& stats() { return stats_; }
  const EncoderStats& stats() const { return stats_; }
  const HeadParams<Real>& head() const { return head_; }

  PqrnnModel clone() const;

  struct Outputs {
    Var<Real> encoded;              // [batch, T, 2S]
    IntentHeadOutput<Real> intent;  // logits [batch, I]
    Var<Real> arg_logits;           // [batch, T, A]
    Tensor<Real> delta;             // [batch, I] intent used for arguments
    SequenceBatch<Real> seq;
  };

  // forced_intents has one entry per sequence; a negative entry uses the
  // model's own argmax intent. An empty span means argmax for every row.
  Outputs forward(Tape<Real>& tape, const PaddedFeatures& features,
                  std::span<const int> forced_intents,
                  const ForwardContext& ctx) const;

 private:
  PqrnnModel() = default;
  void bind();

  ModelConfig config_;
  ParameterSet<Real> params_;
  EncoderStats stats_;
  EncoderParams<Real> encoder_;
  HeadParams<Real> head_;
};

struct ParseOutput {
  std::vector<double> intent_probs;            // I
  std::vector<std::vector<double>> arg_probs;  // T x A
  int intent = 0;
  std::vector<int> slots;  // after BIO repair

  // P(intent | q) * prod_t P(slot_t | intent, q).
  double joint_probability() const;
};

// Inference-mode parse of a padded batch.
template <typename Real>
std::vector<ParseOutput> parse_batch(const PqrnnModel<Real>& model,
                                     const PaddedFeatures& features);

// Single-query forward. training == true requires `intent_label` (teacher
// forcing) and an rng; inference conditions arguments on the argmax intent.
template <typename Real>
ParseOutput joint_forward(const PqrnnModel<Real>& model,
                          const std::vector<std::string>& tokens,
                          std::optional<int> intent_label, bool training,
                          std::mt19937_64* rng = nullptr);

// Exact number of trainable scalars for `config`.
Index param_count(const ModelConfig& config);

}  // namespace pqrnn

#endif  // PQRNN_MODEL_H_
