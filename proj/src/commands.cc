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

#include "pqrnn/commands.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pqrnn/checkpoint.h"
#include "pqrnn/errors.h"

namespace pqrnn {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

RunConfig resolve_config(const std::string& config_path, const Overrides& flags) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (flags.steps) c.train.steps = *flags.steps;
  if (flags.batch_size) c.train.batch_size = *flags.batch_size;
  if (flags.teacher_logit_scale) c.train.teacher_logit_scale = *flags.teacher_logit_scale;
  if (flags.augment_ratio) c.data.augment_ratio = *flags.augment_ratio;
  if (flags.seed) c.train.seed = *flags.seed;
  if (flags.out_dir) c.out_dir = *flags.out_dir;
  c.validate();
  return c;
}

namespace {

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["count"] = m.count;
  j["intent_accuracy"] = m.intent_accuracy;
  j["slot_f1"] = m.slot_f1;
  j["exact_match"] = m.exact_match;
  j["slot_precision"] = m.slot_precision;
  j["slot_recall"] = m.slot_recall;
  return j;
}

const std::string& require_path(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("data.") + key + " is required");
  return path;
}

struct LoadedData {
  LabelSchema schema;
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

LoadedData load_data(const DataConfig& data) {
  LoadedData out;
  std::optional<LabelSchema> fixed;
  if (!data.schema.empty()) fixed = load_schema(data.schema);
  auto train = load_dataset(require_path(data.train, "train"), fixed ? &*fixed : nullptr);
  out.schema = train.schema;
  out.train = std::move(train.examples);
  out.dev = load_dataset(require_path(data.dev, "dev"), &out.schema).examples;
  if (!data.test.empty()) out.test = load_dataset(data.test, &out.schema).examples;
  return out;
}

ModelConfig model_config(const RunConfig& c, const LabelSchema& schema) {
  ModelConfig m;
  m.projection = c.projection;
  m.encoder = c.encoder;
  m.num_intents = schema.num_intents();
  m.num_args = schema.num_args();
  return m;
}

RunOutcome run_training(const RunConfig& config, const LoadedData& data,
                        const TrainInputs& inputs, const TrainConfig& train,
                        std::ostream& log) {
  fs::create_directories(config.out_dir);
  const fs::path dir(config.out_dir);
  save_run_config((dir / "config.json").string(), config);
  save_schema((dir / "schema.json").string(), data.schema);
  RunOutcome outcome;
  outcome.metrics_path = (dir / "metrics.jsonl").string();
  outcome.checkpoint_path = (dir / "model.ckpt").string();
  std::ofstream metrics(outcome.metrics_path);
  if (!metrics) throw DataError("cannot write " + outcome.metrics_path);

  auto model = PqrnnModel<float>::create(model_config(config, data.schema), train.seed);
  log << "training " << inputs.train.size() << " examples, "
      << param_count(model.config()) << " parameters, " << train.steps
      << " steps\n";
  const int threads = default_thread_count();
  TrainResult result = train_loop(std::move(model), inputs, train, &metrics, threads);
  save_checkpoint(outcome.checkpoint_path, result.best, data.schema);

  outcome.best_step = result.best_step;
  outcome.history = std::move(result.history);
  for (const auto& rec : outcome.history) {
    if (rec.step == outcome.best_step) outcome.best_dev = rec.dev;
  }
  log << "best dev exact match " << outcome.best_dev.exact_match << " at step "
      << outcome.best_step << "\n";
  if (!data.test.empty()) {
    outcome.test = evaluate(result.best, data.test, data.schema, 64, threads);
    std::ofstream test_out((dir / "test_metrics.json").string());
    test_out << metrics_json(*outcome.test).dump(2) << '\n';
    log << "test exact match " << outcome.test->exact_match << "\n";
  }
  return outcome;
}

}  // namespace

RunOutcome cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const LoadedData data = load_data(config.data);
  TrainConfig train = config.train;
  train.distill_mode = DistillMode::kOff;
  TrainInputs inputs;
  inputs.train = data.train;
  inputs.dev = data.dev;
  inputs.schema = &data.schema;
  return run_training(config, data, inputs, train, log);
}

RunOutcome cmd_distill(const RunConfig& config, std::ostream& log) {
  config.validate();
  const LoadedData data = load_data(config.data);
  std::vector<Example> pool;
  if (config.data.augment_ratio > 0) {
    pool = load_queries(require_path(config.data.augmented, "augmented"),
                        Origin::kAugmented);
  }
  std::string warning;
  const auto merged =
      merge_augmented(data.train, pool, config.data.augment_ratio,
                      config.train.seed, config.data.allow_any_ratio, &warning);
  if (!warning.empty()) log << "warning: " << warning << "\n";

  const auto records =
      read_teacher_jsonl(require_path(config.data.teacher_logits, "teacher_logits"));
  const auto aligned = align_teacher(merged, records, data.schema);
  std::vector<TeacherRecord> dev_records;
  std::vector<const TeacherRecord*> dev_aligned;
  if (!config.data.dev_teacher_logits.empty()) {
    dev_records = read_teacher_jsonl(config.data.dev_teacher_logits);
    dev_aligned = align_teacher(data.dev, dev_records, data.schema);
  }
  TrainConfig train = config.train;
  if (train.distill_mode == DistillMode::kOff) train.distill_mode = DistillMode::kSoftOnly;
  TrainInputs inputs;
  inputs.train = merged;
  inputs.dev = data.dev;
  inputs.schema = &data.schema;
  inputs.train_teacher = aligned;
  inputs.dev_teacher = dev_aligned;
  log << "distilling with teacher logit scale " << train.teacher_logit_scale
      << ", augment ratio " << config.data.augment_ratio << "\n";
  return run_training(config, data, inputs, train, log);
}

Metrics cmd_eval(const std::string& checkpoint, const std::string& data_path,
                 std::ostream& out, int threads) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto data = load_dataset(data_path, &ckpt.schema);
  const Metrics m = evaluate(ckpt.model, data.examples, ckpt.schema, 64, threads);
  out << metrics_json(m).dump() << '\n';
  return m;
}

int cmd_predict(const std::string& checkpoint, std::istream& in,
                std::ostream& out, std::ostream& err, bool bench, int threads) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  std::vector<Example> queries;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Example ex;
    std::string_view text = line;
    const auto tab = line.find('\t');
    if (tab != std::string::npos) {
      ex.id = line.substr(0, tab);
      text = std::string_view(line).substr(tab + 1);
    } else {
      ex.id = "line-" + std::to_string(lineno);
    }
    try {
      ex.tokens = tokenize(text);
    } catch (const InputError&) {
      err << "warning: line " << lineno << " is empty, skipped\n";
      continue;
    }
    queries.push_back(std::move(ex));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto parses = predict_examples(ckpt.model, queries, 64, threads);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& intents = ckpt.schema.intents();
  const auto& labels = ckpt.schema.arg_labels();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const ParseOutput& p = parses[i];
    ordered_json j;
    j["id"] = queries[i].id;
    j["intent"] = intents[p.intent];
    j["intent_prob"] = p.intent_probs[p.intent];
    ordered_json slots = ordered_json::array();
    for (std::size_t t = 0; t < p.slots.size(); ++t) {
      ordered_json slot;
      slot["token"] = queries[i].tokens[t];
      slot["label"] = labels[p.slots[t]];
      slot["prob"] = p.arg_probs[t][p.slots[t]];
      slots.push_back(std::move(slot));
    }
    j["slots"] = std::move(slots);
    out << j.dump() << '\n';
  }
  if (bench) {
    const double qps = seconds > 0 ? queries.size() / seconds : 0.0;
    err << "predict: " << queries.size() << " queries in " << seconds << " s ("
        << qps << " queries/sec, " << threads << " thread(s))\n";
  }
  return static_cast<int>(queries.size());
}

std::vector<std::pair<std::string, RunConfig>> ablation_grid(const RunConfig& base) {
  std::vector<std::pair<std::string, RunConfig>> grid;
  grid.emplace_back("default", base);
  auto variant = [&](const char* name, auto&& change) {
    RunConfig c = base;
    change(c);
    grid.emplace_back(name, std::move(c));
  };
  variant("no_quantization", [](RunConfig& c) { c.encoder.quantize = !c.encoder.quantize; });
  variant("no_batch_norm", [](RunConfig& c) { c.encoder.batch_norm = !c.encoder.batch_norm; });
  variant("unbalanced_map", [](RunConfig& c) {
    c.projection.map_mode = c.projection.map_mode == MapMode::kBalanced
                                ? MapMode::kUnbalanced
                                : MapMode::kBalanced;
  });
  variant("zoneout_0", [](RunConfig& c) { c.encoder.zoneout_base = 0; });
  variant("half_state", [](RunConfig& c) { c.encoder.state_size = std::max(1, c.encoder.state_size / 2); });
  variant("half_bottleneck", [](RunConfig& c) {
    c.encoder.bottleneck_dim = std::max(1, c.encoder.bottleneck_dim / 2);
  });
  variant("half_features", [](RunConfig& c) {
    c.projection.feature_dim = std::max(2, (c.projection.feature_dim / 2) & ~1);
  });
  return grid;
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  const json ja = json(to_json(a)).flatten();
  const json jb = json(to_json(b)).flatten();
  std::vector<std::string> keys;
  for (const auto& [key, value] : ja.items()) {
    if (!jb.contains(key) || jb[key] != value) keys.push_back(key);
  }
  for (const auto& [key, value] : jb.items()) {
    if (!ja.contains(key)) keys.push_back(key);
  }
  // Flattened keys are JSON pointers; report them dotted.
  for (auto& k : keys) {
    std::replace(k.begin(), k.end(), '/', '.');
    if (!k.empty() && k.front() == '.') k.erase(0, 1);
  }
  return keys;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config, std::ostream& log) {
  config.validate();
  std::vector<AblationRow> rows;
  for (auto& [name, variant] : ablation_grid(config)) {
    AblationRow row;
    row.variant = name;
    const auto diff = config_diff(config, variant);
    if (diff.size() > 1) throw ConfigError("ablation variant " + name + " changes several fields");
    row.changed = diff.empty() ? "" : diff.front();
    variant.out_dir = (fs::path(config.out_dir) / name).string();
    log << "== " << name << (row.changed.empty() ? "" : " (" + row.changed + ")") << "\n";
    const RunOutcome outcome = cmd_train(variant, log);
    row.config = variant;
    row.config.out_dir = config.out_dir;
    row.metrics = outcome.test ? *outcome.test : outcome.best_dev;
    rows.push_back(std::move(row));
  }
  fs::create_directories(config.out_dir);
  std::ofstream((fs::path(config.out_dir) / "ablation.tsv").string()) << ablation_tsv(rows);
  std::ofstream((fs::path(config.out_dir) / "ablation.json").string()) << ablation_json(rows);
  log << ablation_tsv(rows);
  return rows;
}

std::string ablation_tsv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "variant\tchanged\tintent_accuracy\tslot_f1\texact_match\n";
  for (const auto& r : rows) {
    out << r.variant << '\t' << (r.changed.empty() ? "-" : r.changed) << '\t'
        << r.metrics.intent_accuracy << '\t' << r.metrics.slot_f1 << '\t'
        << r.metrics.exact_match << '\n';
  }
  return out.str();
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["variant"] = r.variant;
    j["changed"] = r.changed.empty() ? "-" : r.changed;
    j["intent_accuracy"] = r.metrics.intent_accuracy;
    j["slot_f1"] = r.metrics.slot_f1;
    j["exact_match"] = r.metrics.exact_match;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

void cmd_synth(const SyntheticConfig& config, const std::string& out_dir) {
  write_synthetic(out_dir, generate_synthetic(config));
}

std::vector<TeacherRecord> teacher_records(const PqrnnModel<float>& model,
                                           std::span<const Example> examples,
                                           int threads) {
  std::vector<TeacherRecord> out(examples.size());
  constexpr std::size_t kBatch = 64;
  const std::size_t chunks = (examples.size() + kBatch - 1) / kBatch;
  std::atomic<std::size_t> next{0};
  const int intents = model.config().num_intents, args = model.config().num_args;
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * kBatch;
      const std::size_t end = std::min(examples.size(), begin + kBatch);
      std::vector<ProjectedSequence> rows;
      for (std::size_t i = begin; i < end; ++i) {
        rows.push_back(project_sequence(examples[i].tokens, model.config().projection));
      }
      std::vector<const ProjectedSequence*> ptrs;
      for (const auto& r : rows) ptrs.push_back(&r);
      const auto features = pad_sequences(ptrs);
      Tape<float> tape(false);
      const auto res = model.forward(tape, features, {}, ForwardContext{});
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t b = i - begin;
        TeacherRecord& r = out[i];
        r.id = examples[i].id;
        r.tokens = examples[i].tokens;
        const float* il = res.intent.logits->raw() + b * intents;
        r.intent_logits.assign(il, il + intents);
        for (std::size_t t = 0; t < examples[i].tokens.size(); ++t) {
          const float* al = res.arg_logits->raw() + (b * features.steps + t) * args;
          r.slot_logits.emplace_back(al, al + args);
        }
      }
    }
  };
  const int n = std::clamp<int>(threads, 1, std::max<int>(1, static_cast<int>(chunks)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

int cmd_export_logits(const std::string& checkpoint, const std::string& data_path,
                      const std::string& out_path, int threads) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto queries = load_queries(data_path, Origin::kSupervised);
  const auto records = teacher_records(ckpt.model, queries, threads);
  write_teacher_jsonl(out_path, records);
  return static_cast<int>(records.size());
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const AlignmentError*>(&e)) return 4;
  if (dynamic_cast<const CheckpointError*>(&e)) return 5;
  return 1;
}

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace pqrnn
