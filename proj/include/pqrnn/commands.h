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

// Entry points behind the `pqrnn` command line tool.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration, 3 data, 4 teacher
// alignment, 5 checkpoint.

#ifndef PQRNN_COMMANDS_H_
#define PQRNN_COMMANDS_H_

#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pqrnn/data.h"
#include "pqrnn/metrics.h"
#include "pqrnn/model.h"
#include "pqrnn/run_config.h"
#include "pqrnn/synthetic.h"
#include "pqrnn/training.h"

namespace pqrnn {

// Flag overrides applied on top of a config file.
struct Overrides {
  std::optional<int> steps;
  std::optional<int> batch_size;
  std::optional<double> teacher_logit_scale;
  std::optional<int> augment_ratio;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

// Loads `config_path` (defaults when empty), applies the overrides and
// validates.
RunConfig resolve_config(const std::string& config_path, const Overrides& flags);

struct RunOutcome {
  int best_step = 0;
  Metrics best_dev;
  std::optional<Metrics> test;
  std::vector<EvalRecord> history;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Train on data.train, select on data.dev. Writes config.json, model.ckpt
// and metrics.jsonl to out_dir (plus test_metrics.json when data.test is
// set). Progress goes to `log`.
RunOutcome cmd_train(const RunConfig& config, std::ostream& log);

// Distill from data.teacher_logits, merging data.augmented at
// data.augment_ratio. distill_mode off is promoted to soft_only.
RunOutcome cmd_distill(const RunConfig& config, std::ostream& log);

// Writes a metrics JSON object to `out`.
Metrics cmd_eval(const std::string& checkpoint, const std::string& data_path,
                 std::ostream& out, int threads = 1);

// Reads "query" or "id<TAB>query" lines from `in`, writes one JSON parse per
// query to `out`. Empty lines are skipped with a warning on `err`. With
// `bench` a throughput line goes to `err`. Returns the number of parses.
int cmd_predict(const std::string& checkpoint, std::istream& in,
                std::ostream& out, std::ostream& err, bool bench = false,
                int threads = 1);

struct AblationRow {
  std::string variant;
  std::string changed;  // dotted config key, empty for the default row
  RunConfig config;
  Metrics metrics;
};

// Default plus one-switch variants: quantization off, batch norm off,
// unbalanced map, zoneout 0, S/2, B/2, N/2.
std::vector<std::pair<std::string, RunConfig>> ablation_grid(const RunConfig& base);

// Dotted keys whose values differ between the two configs.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

// Trains every grid entry, reporting test metrics when data.test is set and
// dev metrics otherwise. Writes ablation.tsv and ablation.json to out_dir.
std::vector<AblationRow> cmd_ablate(const RunConfig& config, std::ostream& log);

std::string ablation_tsv(const std::vector<AblationRow>& rows);
std::string ablation_json(const std::vector<AblationRow>& rows);

void cmd_synth(const SyntheticConfig& config, const std::string& out_dir);

// Raw intent logits and argument logits (conditioned on the predicted
// intent) for every example.
std::vector<TeacherRecord> teacher_records(const PqrnnModel<float>& model,
                                           std::span<const Example> examples,
                                           int threads = 1);

// Exports teacher records for a 2- or 4-column query file. Returns the count.
int cmd_export_logits(const std::string& checkpoint, const std::string& data_path,
                      const std::string& out_path, int threads = 1);

int exit_code_for(const std::exception& e);

// Runs `body`, printing any error to `err` and mapping it to an exit code.
int run_guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace pqrnn

#endif  // PQRNN_COMMANDS_H_
