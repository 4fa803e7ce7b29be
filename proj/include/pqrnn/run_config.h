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

// JSON run configuration.
//
//   {
//     "projection": {"feature_dim": 1024, "map_mode": "balanced", ...},
//     "encoder":    {"bottleneck_dim": 256, "state_size": 128, ...},
//     "train":      {"steps": 5000, "batch_size": 64, ...},
//     "data":       {"train": "train.tsv", "dev": "dev.tsv", ...},
//     "out_dir":    "runs/default"
//   }
//
// Every section and key is optional; unknown keys are rejected. Seeds accept
// either a number or a "0x..." string.

#ifndef PQRNN_RUN_CONFIG_H_
#define PQRNN_RUN_CONFIG_H_

#include <string>

#include "json.hpp"
#include "pqrnn/encoder.h"
#include "pqrnn/model.h"
#include "pqrnn/projection.h"
#include "pqrnn/training.h"

namespace pqrnn {

struct DataConfig {
  std::string train;
  std::string dev;
  std::string test;
  std::string schema;              // inferred from train when empty
  std::string augmented;           // unlabeled query pool
  std::string teacher_logits;      // JSONL covering train (+ augmented)
  std::string dev_teacher_logits;  // optional, enables dev soft loss
  int augment_ratio = 0;           // 0 = off, else 1, 4 or 8
  bool allow_any_ratio = false;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  ProjectionConfig projection;
  EncoderConfig encoder;
  TrainConfig train;
  DataConfig data;
  std::string out_dir = "out";

  void validate() const;  // throws ConfigError
  bool operator==(const RunConfig&) const = default;
};

nlohmann::ordered_json to_json(const ProjectionConfig& c);
nlohmann::ordered_json to_json(const EncoderConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const DataConfig& c);
nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);

// Fields missing from `j` keep the values already in `c`. Throw ConfigError
// on unknown keys or wrong types.
void update_from_json(ProjectionConfig& c, const nlohmann::json& j);
void update_from_json(EncoderConfig& c, const nlohmann::json& j);
void update_from_json(TrainConfig& c, const nlohmann::json& j);
void update_from_json(DataConfig& c, const nlohmann::json& j);
void update_from_json(RunConfig& c, const nlohmann::json& j);

ModelConfig model_config_from_json(const nlohmann::json& j);

// Throws ConfigError when the file is unreadable or invalid.
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

}  // namespace pqrnn

#endif  // PQRNN_RUN_CONFIG_H_
