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

// Losses, Adam, the learning-rate schedule and the training loop.

#ifndef PQRNN_TRAINING_H_
#define PQRNN_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqrnn/data.h"
#include "pqrnn/metrics.h"
#include "pqrnn/model.h"

namespace pqrnn {

enum class DistillMode { kOff, kSoftOnly, kSoftPlusHard };

const char* distill_mode_name(DistillMode mode);
DistillMode parse_distill_mode(std::string_view name);

struct TrainConfig {
  double base_lr = 1e-3;
  double lr_decay_rate = 0.9;
  int lr_decay_steps = 1000;
  double l2_scale = 1e-5;
  int steps = 5000;
  int batch_size = 64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;
  int eval_every = 100;
  double teacher_logit_scale = 1.0;
  DistillMode distill_mode = DistillMode::kOff;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  bool operator==(const TrainConfig&) const = default;
};

// base_lr * decay_rate^(step / decay_steps), continuous exponent.
double lr_at(const TrainConfig& config, long step);

// softmax(s * logits). Throws ConfigError for s <= 0.
std::vector<double> scale_teacher_logits(std::span<const double> logits, double s);

double entropy(std::span<const double> probs);

template <typename Real>
struct LossTerms {
  Var<Real> total;
  double intent = 0;  // data term on the intent head
  double args = 0;    // data term on the argument head
  double l2 = 0;
};

// l2_scale * sum of squares over parameters flagged for decay.
template <typename Real>
Var<Real> l2_penalty(Tape<Real>& tape, const ParameterSet<Real>& params,
                     double scale);

// CE(intent) + CE(arguments over valid tokens) + L2, arguments conditioned
// on the gold intent. Throws InputError when a member has no labels.
template <typename Real>
LossTerms<Real> supervised_loss(Tape<Real>& tape, const PqrnnModel<Real>& model,
                                const LabeledBatch& batch,
                                const TrainConfig& config,
                                const ForwardContext& ctx);

// Soft CE against softmax(s * teacher logits) on both heads, plus the
// supervised terms on labeled members for soft_plus_hard, plus L2. Arguments
// are conditioned on the gold intent when present, otherwise on the teacher's
// top intent. Throws InputError without teacher targets.
template <typename Real>
LossTerms<Real> distill_loss(Tape<Real>& tape, const PqrnnModel<Real>& model,
                             const LabeledBatch& batch, const TrainConfig& config,
                             const ForwardContext& ctx);

template <typename Real>
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One bias-corrected Adam update over every parameter. Throws NumericError
// naming the parameter when a gradient is not finite.
template <typename Real>
void adam_step(ParameterSet<Real>& params, AdamState<Real>& state, double lr,
               const TrainConfig& config);

struct EvalRecord {
  int step = 0;
  double train_loss = 0;
  double lr = 0;
  Metrics dev;
  double best_dev_exact_match = 0;
  std::optional<double> dev_soft_loss;
};

std::string eval_record_to_json(const EvalRecord& record);

// Inference-mode parses of `examples`, split over up to `threads` workers.
std::vector<ParseOutput> predict_examples(const PqrnnModel<float>& model,
                                          std::span<const Example> examples,
                                          int batch_size = 64, int threads = 1);

// Throws InputError on an unlabeled example.
Metrics evaluate(const PqrnnModel<float>& model, std::span<const Example> examples,
                 const LabelSchema& schema, int batch_size = 64, int threads = 1);

struct TrainInputs {
  std::span<const Example> train;
  std::span<const Example> dev;
  const LabelSchema* schema = nullptr;
  // One record per train / dev example when distilling; dev records enable
  // the dev soft loss.
  std::span<const TeacherRecord* const> train_teacher;
  std::span<const TeacherRecord* const> dev_teacher;
};

struct TrainResult {
  PqrnnModel<float> best;
  int best_step = 0;
  std::vector<EvalRecord> history;
  std::vector<double> loss_trace;  // one entry per step
};

// Runs config.steps updates; evaluates dev exact match every eval_every steps
// and at the last step, keeping the best model (earliest on ties). Each
// evaluation is written as a JSON line to `metrics_log` when given.
TrainResult train_loop(PqrnnModel<float> model, const TrainInputs& inputs,
                       const TrainConfig& config,
                       std::ostream* metrics_log = nullptr,
                       int eval_threads = 1);

// Worker count from PQRNN_NUM_THREADS (default: hardware concurrency).
int default_thread_count();

}  // namespace pqrnn

#endif  // PQRNN_TRAINING_H_
