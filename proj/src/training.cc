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

#include "pqrnn/training.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "pqrnn/errors.h"
#include "pqrnn/ops.h"

namespace pqrnn {

const char* distill_mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::kOff: return "off";
    case DistillMode::kSoftOnly: return "soft_only";
    case DistillMode::kSoftPlusHard: return "soft_plus_hard";
  }
  return "off";
}

DistillMode parse_distill_mode(std::string_view name) {
  if (name == "off") return DistillMode::kOff;
  if (name == "soft_only") return DistillMode::kSoftOnly;
  if (name == "soft_plus_hard") return DistillMode::kSoftPlusHard;
  throw ConfigError("unknown distill_mode '" + std::string(name) +
                    "' (off, soft_only, soft_plus_hard)");
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
  positive(base_lr, "base_lr");
  positive(lr_decay_rate, "lr_decay_rate");
  positive(teacher_logit_scale, "teacher_logit_scale");
  positive(adam_epsilon, "adam_epsilon");
  if (lr_decay_steps < 1) throw ConfigError("lr_decay_steps must be >= 1");
  if (!(l2_scale >= 0)) throw ConfigError("l2_scale must be >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
}

double lr_at(const TrainConfig& config, long step) {
  return config.base_lr *
         std::pow(config.lr_decay_rate,
                  static_cast<double>(step) / config.lr_decay_steps);
}

std::vector<double> scale_teacher_logits(std::span<const double> logits,
                                         double s) {
  if (!(s > 0)) throw ConfigError("teacher logit scale must be positive");
  if (logits.empty()) return {};
  std::vector<double> p(logits.size());
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(s * (logits[i] - hi));
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double entropy(std::span<const double> probs) {
  double h = 0;
  for (double p : probs) {
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

template <typename Real>
Var<Real> l2_penalty(Tape<Real>& tape, const ParameterSet<Real>& params,
                     double scale) {
  Var<Real> total = scalar_var<Real>(0);
  for (const auto& p : params.all()) {
    if (!p.l2) continue;
    total = add(tape, total, sum_squares(tape, p.value));
  }
  return affine(tape, total, static_cast<Real>(scale), Real(0));
}

namespace {

template <typename Real>
Var<Real> finish(Tape<Real>& tape, LossTerms<Real>& terms, Var<Real> data,
                 const PqrnnModel<Real>& model, const TrainConfig& config) {
  auto l2 = l2_penalty(tape, model.params(), config.l2_scale);
  terms.l2 = static_cast<double>((*l2)[0]);
  return add(tape, data, l2);
}

int argmax_logits(const double* row, int n) {
  return argmax(std::span<const double>(row, n));
}

}  // namespace

template <typename Real>
LossTerms<Real> supervised_loss(Tape<Real>& tape, const PqrnnModel<Real>& model,
                                const LabeledBatch& batch,
                                const TrainConfig& config,
                                const ForwardContext& ctx) {
  for (int b = 0; b < batch.batch(); ++b) {
    if (batch.intents[b] < 0) {
      throw InputError("supervised loss needs labeled examples");
    }
  }
  const auto out = model.forward(tape, batch.features, batch.intents, ctx);
  auto ce_intent = cross_entropy(tape, out.intent.logits,
                                 std::span<const int>(batch.intents));
  auto ce_args = cross_entropy(tape, out.arg_logits,
                               std::span<const int>(batch.slots));
  LossTerms<Real> terms;
  terms.intent = static_cast<double>((*ce_intent)[0]);
  terms.args = static_cast<double>((*ce_args)[0]);
  terms.total = finish(tape, terms, add(tape, ce_intent, ce_args), model, config);
  return terms;
}

template <typename Real>
LossTerms<Real> distill_loss(Tape<Real>& tape, const PqrnnModel<Real>& model,
                             const LabeledBatch& batch, const TrainConfig& config,
                             const ForwardContext& ctx) {
  if (!batch.has_teacher) throw InputError("distill loss needs teacher targets");
  if (config.distill_mode == DistillMode::kOff) {
    throw ConfigError("distill loss called with distill_mode off");
  }
  const int nb = batch.batch(), steps = batch.steps();
  const int intents = model.config().num_intents, args = model.config().num_args;
  std::vector<int> forced(nb);
  for (int b = 0; b < nb; ++b) {
    forced[b] = batch.intents[b] >= 0
                    ? batch.intents[b]
                    : argmax_logits(&batch.teacher_intent[b * intents], intents);
  }
  const auto out = model.forward(tape, batch.features, forced, ctx);

  const double s = config.teacher_logit_scale;
  Tensor<Real> intent_target({nb, intents});
  for (int b = 0; b < nb; ++b) {
    const auto p = scale_teacher_logits(
        std::span<const double>(&batch.teacher_intent[b * intents], intents), s);
    std::copy(p.begin(), p.end(), intent_target.raw() + b * intents);
  }
  const auto mask = batch.mask();
  Tensor<Real> arg_target({nb, steps, args});
  for (int r = 0; r < nb * steps; ++r) {
    if (mask[r] == 0) continue;
    const auto p = scale_teacher_logits(
        std::span<const double>(&batch.teacher_slots[r * args], args), s);
    std::copy(p.begin(), p.end(), arg_target.raw() + r * args);
  }
  const std::vector<Real> all_rows(nb, Real(1));
  const std::vector<Real> token_rows(mask.begin(), mask.end());
  auto soft_intent = soft_cross_entropy(tape, out.intent.logits, intent_target,
                                        std::span<const Real>(all_rows));
  auto soft_args = soft_cross_entropy(tape, out.arg_logits, arg_target,
                                      std::span<const Real>(token_rows));
  auto data = add(tape, soft_intent, soft_args);
  LossTerms<Real> terms;
  terms.intent = static_cast<double>((*soft_intent)[0]);
  terms.args = static_cast<double>((*soft_args)[0]);
  if (config.distill_mode == DistillMode::kSoftPlusHard) {
    auto hard_intent = cross_entropy(tape, out.intent.logits,
                                     std::span<const int>(batch.intents));
    auto hard_args = cross_entropy(tape, out.arg_logits,
                                   std::span<const int>(batch.slots));
    terms.intent += static_cast<double>((*hard_intent)[0]);
    terms.args += static_cast<double>((*hard_args)[0]);
    data = add(tape, data, add(tape, hard_intent, hard_args));
  }
  terms.total = finish(tape, terms, data, model, config);
  return terms;
}

template <typename Real>
void adam_step(ParameterSet<Real>& params, AdamState<Real>& state, double lr,
               const TrainConfig& config) {
  const auto& all = params.all();
  if (state.m.empty()) {
    for (const auto& p : all) {
      state.m.emplace_back(p.value->size(), 0.0);
      state.v.emplace_back(p.value->size(), 0.0);
    }
  }
  if (state.m.size() != all.size()) {
    throw ShapeError("Adam state does not match the parameter set");
  }
  for (const auto& p : all) {
    for (Real g : p.value->grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient in " + p.name + " at step " +
                           std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < all.size(); ++i) {
    Tensor<Real>& w = *all[i].value;
    auto grad = w.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (Index j = 0; j < w.size(); ++j) {
      const double g = grad[j];
      m[j] = b1 * m[j] + (1 - b1) * g;
      v[j] = b2 * v[j] + (1 - b2) * g * g;
      const double m_hat = m[j] / c1, v_hat = v[j] / c2;
      w[j] = static_cast<Real>(w[j] - lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon));
    }
  }
}

std::string eval_record_to_json(const EvalRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["train_loss"] = r.train_loss;
  j["lr"] = r.lr;
  j["dev_exact_match"] = r.dev.exact_match;
  j["dev_intent_acc"] = r.dev.intent_accuracy;
  j["dev_slot_f1"] = r.dev.slot_f1;
  j["best_dev_exact_match"] = r.best_dev_exact_match;
  if (r.dev_soft_loss) j["dev_soft_loss"] = *r.dev_soft_loss;
  return j.dump();
}

int default_thread_count() {
  if (const char* env = std::getenv("PQRNN_NUM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ParseOutput> predict_examples(const PqrnnModel<float>& model,
                                          std::span<const Example> examples,
                                          int batch_size, int threads) {
  std::vector<ParseOutput> out(examples.size());
  if (examples.empty()) return out;
  batch_size = std::max(1, batch_size);
  const std::size_t chunks = (examples.size() + batch_size - 1) / batch_size;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * batch_size;
      const std::size_t end = std::min(examples.size(), begin + batch_size);
      std::vector<ProjectedSequence> rows;
      rows.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        rows.push_back(project_sequence(examples[i].tokens, model.config().projection));
      }
      std::vector<const ProjectedSequence*> ptrs;
      for (const auto& r : rows) ptrs.push_back(&r);
      auto parses = parse_batch(model, pad_sequences(ptrs));
      std::move(parses.begin(), parses.end(), out.begin() + begin);
    }
  };
  const int n = std::clamp<int>(threads, 1, static_cast<int>(chunks));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

Metrics evaluate(const PqrnnModel<float>& model, std::span<const Example> examples,
                 const LabelSchema& schema, int batch_size, int threads) {
  std::vector<Prediction> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) {
    if (!ex.labeled()) throw InputError("cannot evaluate unlabeled example " + ex.id);
    auto labels = encode_labels(ex, schema);
    gold.push_back({labels.intent, std::move(labels.slots)});
  }
  const auto parses = predict_examples(model, examples, batch_size, threads);
  std::vector<Prediction> predicted;
  predicted.reserve(parses.size());
  for (const auto& p : parses) predicted.push_back({p.intent, p.slots});
  return compute_metrics(predicted, gold);
}

namespace {

// Inference-mode soft cross-entropy of the student against the scaled
// teacher: intent term averaged over examples plus argument term averaged
// over tokens.
double dev_soft_loss(const PqrnnModel<float>& model, const TrainInputs& inputs,
                     const FeatureCache& features, const TrainConfig& config) {
  TrainConfig soft = config;
  soft.l2_scale = 0;
  if (soft.distill_mode == DistillMode::kSoftPlusHard) {
    soft.distill_mode = DistillMode::kSoftOnly;
  }
  double intent_sum = 0, arg_sum = 0;
  long examples = 0, tokens = 0;
  const std::size_t n = inputs.dev.size();
  for (std::size_t begin = 0; begin < n; begin += 64) {
    std::vector<std::size_t> idx(std::min<std::size_t>(64, n - begin));
    std::iota(idx.begin(), idx.end(), begin);
    const auto batch = make_batch(inputs.dev, idx, features, *inputs.schema,
                                  inputs.dev_teacher);
    Tape<float> tape(false);
    const auto terms = distill_loss(tape, model, batch, soft, ForwardContext{});
    long batch_tokens = 0;
    for (int len : batch.features.lengths) batch_tokens += len;
    intent_sum += terms.intent * static_cast<double>(idx.size());
    arg_sum += terms.args * static_cast<double>(batch_tokens);
    examples += static_cast<long>(idx.size());
    tokens += batch_tokens;
  }
  return intent_sum / examples + arg_sum / tokens;
}

}  // namespace

TrainResult train_loop(PqrnnModel<float> model, const TrainInputs& inputs,
                       const TrainConfig& config, std::ostream* metrics_log,
                       int eval_threads) {
  config.validate();
  if (inputs.train.empty()) throw DataError("training set is empty");
  if (inputs.dev.empty()) throw DataError("dev set is empty");
  if (!inputs.schema) throw InputError("train_loop needs a label schema");
  const bool distilling = config.distill_mode != DistillMode::kOff;
  if (distilling && inputs.train_teacher.size() != inputs.train.size()) {
    throw AlignmentError("distillation needs one teacher record per training example");
  }
  const bool dev_soft = distilling && inputs.dev_teacher.size() == inputs.dev.size();

  const FeatureCache features(inputs.train, model.config().projection);
  std::optional<FeatureCache> dev_features;
  if (dev_soft) dev_features.emplace(inputs.dev, model.config().projection);

  std::mt19937_64 order_rng(splitmix64_mix(config.seed));
  std::mt19937_64 noise_rng(splitmix64_mix(config.seed + 1));
  const std::size_t n = inputs.train.size();
  const std::size_t batch_size = std::min<std::size_t>(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;

  AdamState<float> adam;
  std::optional<PqrnnModel<float>> best;
  TrainResult result{model.clone(), 0, {}, {}};
  double best_em = -1, loss_since_eval = 0;
  int steps_since_eval = 0;
  std::vector<std::size_t> idx(batch_size);

  for (int step = 1; step <= config.steps; ++step) {
    for (std::size_t b = 0; b < batch_size; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      idx[b] = order[cursor++];
    }
    const auto batch = make_batch(
        inputs.train, idx, features, *inputs.schema,
        distilling ? inputs.train_teacher : std::span<const TeacherRecord* const>{});
    Tape<float> tape;
    StatUpdates updates;
    ForwardContext ctx{true, &noise_rng, &updates};
    const auto terms = distilling ? distill_loss(tape, model, batch, config, ctx)
                                  : supervised_loss(tape, model, batch, config, ctx);
    tape.backward(terms.total);
    const double lr = lr_at(config, step - 1);
    adam_step(model.params(), adam, lr, config);
    model.params().zero_grad();
    model.stats().apply(updates);
    const double loss = static_cast<double>((*terms.total)[0]);
    result.loss_trace.push_back(loss);
    loss_since_eval += loss;
    ++steps_since_eval;

    if (step % config.eval_every != 0 && step != config.steps) continue;
    EvalRecord rec;
    rec.step = step;
    rec.train_loss = loss_since_eval / steps_since_eval;
    rec.lr = lr;
    rec.dev = evaluate(model, inputs.dev, *inputs.schema, 64, eval_threads);
    if (dev_soft) rec.dev_soft_loss = dev_soft_loss(model, inputs, *dev_features, config);
    if (rec.dev.exact_match > best_em) {
      best_em = rec.dev.exact_match;
      best = model.clone();
      result.best_step = step;
    }
    rec.best_dev_exact_match = best_em;
    loss_since_eval = 0;
    steps_since_eval = 0;
    if (metrics_log) *metrics_log << eval_record_to_json(rec) << '\n' << std::flush;
    result.history.push_back(std::move(rec));
  }
  result.best = std::move(*best);
  return result;
}

#define PQRNN_INSTANTIATE_TRAINING(Real)                                       \
  template Var<Real> l2_penalty(Tape<Real>&, const ParameterSet<Real>&,        \
                                double);                                       \
  template LossTerms<Real> supervised_loss(Tape<Real>&,                        \
                                           const PqrnnModel<Real>&,            \
                                           const LabeledBatch&,                \
                                           const TrainConfig&,                 \
                                           const ForwardContext&);             \
  template LossTerms<Real> distill_loss(Tape<Real>&, const PqrnnModel<Real>&,  \
                                        const LabeledBatch&,                   \
                                        const TrainConfig&,                    \
                                        const ForwardContext&);                \
  template void adam_step(ParameterSet<Real>&, AdamState<Real>&, double,       \
                          const TrainConfig&);

PQRNN_INSTANTIATE_TRAINING(float)
PQRNN_INSTANTIATE_TRAINING(double)

#undef PQRNN_INSTANTIATE_TRAINING

}  // namespace pqrnn
