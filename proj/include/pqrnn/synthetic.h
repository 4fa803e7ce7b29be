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

// Template grammar producing small labeled intent/slot datasets.
//
// Every intent owns two trigger words and a few slot types. A slot is
// written as a cue word followed by a one- or two-token value; slot types
// come in pairs that share one value pool, so only the cue tells them apart.
// Filler words are sprinkled in between.

#ifndef PQRNN_SYNTHETIC_H_
#define PQRNN_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pqrnn/data.h"

namespace pqrnn {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  int num_intents = 5;
  int num_slot_types = 8;
  int vocab_size = 200;
  int slots_per_intent = 3;
  int num_train = 200;
  int num_dev = 200;
  int num_test = 200;
  int num_augmented = 800;  // unlabeled pool

  void validate() const;  // throws ConfigError
};

struct SyntheticData {
  LabelSchema schema;
  std::vector<Example> train, dev, test;
  std::vector<Example> augmented;  // unlabeled
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

// Writes train.tsv, dev.tsv, test.tsv, augmented.tsv and schema.json.
void write_synthetic(const std::string& dir, const SyntheticData& data);

}  // namespace pqrnn

#endif  // PQRNN_SYNTHETIC_H_
