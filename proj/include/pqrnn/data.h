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

// Datasets, label schemas, teacher logits and batching.
//
// Dataset TSV, one example per line (UTF-8, LF):
//   id <TAB> space-separated tokens <TAB> intent <TAB> space-separated BIO tags
// Unlabeled query files carry only the first two columns.
//
// Teacher logits JSONL, one object per example:
//   {"id": str, "tokens": [str], "intent_logits": [I floats],
//    "slot_logits": [[A floats] x T]}
//
// Schema JSON: {"intents": [...], "slot_types": [...]}, index order is file
// order. Argument labels are "O", then B-/I- pairs per slot type.

#ifndef PQRNN_DATA_H_
#define PQRNN_DATA_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pqrnn/projection.h"

namespace pqrnn {

enum class Origin { kSupervised, kAugmented };

struct Example {
  std::string id;
  std::vector<std::string> tokens;
  std::string intent;               // empty when unlabeled
  std::vector<std::string> slots;   // empty when unlabeled
  Origin origin = Origin::kSupervised;
  std::string language;

  bool labeled() const { return !intent.empty(); }
  bool operator==(const Example&) const = default;
};

class LabelSchema {
 public:
  LabelSchema() = default;
  // Throws ConfigError on duplicates or malformed names.
  LabelSchema(std::vector<std::string> intents,
              std::vector<std::string> slot_types);

  // Intents and slot types in order of first appearance.
  static LabelSchema infer(std::span<const Example> examples);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slot_types() const { return slot_types_; }
  const std::vector<std::string>& arg_labels() const { return arg_labels_; }
  int num_intents() const { return static_cast<int>(intents_.size()); }
  int num_args() const { return static_cast<int>(arg_labels_.size()); }

  // -1 when unknown.
  int intent_index(std::string_view name) const;
  int arg_index(std::string_view label) const;

  bool operator==(const LabelSchema& other) const {
    return intents_ == other.intents_ && slot_types_ == other.slot_types_;
  }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slot_types_;
  std::vector<std::string> arg_labels_;
  std::map<std::string, int, std::less<>> intent_index_;
  std::map<std::string, int, std::less<>> arg_index_;
};

std::string schema_to_json(const LabelSchema& schema);
LabelSchema schema_from_json(std::string_view text);
LabelSchema load_schema(const std::string& path);
void save_schema(const std::string& path, const LabelSchema& schema);

// Whitespace split with runs collapsed. Throws InputError on an empty result.
std::vector<std::string> tokenize(std::string_view query);

// Rewrites I-x without a preceding B-x/I-x into B-x. Idempotent. Throws
// InputError on a tag that is not O, B-x or I-x.
void normalize_bio(std::vector<std::string>& tags);

struct Dataset {
  std::vector<Example> examples;
  LabelSchema schema;
};

// With `schema` null the schema is inferred; otherwise every label must be in
// it. Throws DataError naming the file and line.
Dataset load_dataset(const std::string& path, const LabelSchema* schema = nullptr);

// Two-column (id, tokens) or four-column lines; every example is tagged
// augmented. Labels, when present, are kept.
std::vector<Example> load_queries(const std::string& path, Origin origin);

void write_dataset(const std::string& path, std::span<const Example> examples);

// Appends the first ratio * |supervised| examples of a seeded shuffle of the
// augmented pool. Ratio 0 disables augmentation; otherwise the ratio must be
// 1, 4 or 8 unless `allow_any_ratio`. A short pool is used whole and reported
// through `warning`.
std::vector<Example> merge_augmented(std::span<const Example> supervised,
                                     std::span<const Example> augmented,
                                     int ratio, std::uint64_t seed,
                                     bool allow_any_ratio = false,
                                     std::string* warning = nullptr);

struct TeacherRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<double> intent_logits;             // I
  std::vector<std::vector<double>> slot_logits;  // T x A
};

std::vector<TeacherRecord> read_teacher_jsonl(const std::string& path);
void write_teacher_jsonl(const std::string& path,
                         std::span<const TeacherRecord> records);
std::string teacher_record_to_json(const TeacherRecord& record);
TeacherRecord teacher_record_from_json(std::string_view line);

// One record per example, in example order. Throws AlignmentError listing
// every missing id, token mismatch or logit width mismatch.
std::vector<const TeacherRecord*> align_teacher(
    std::span<const Example> examples, std::span<const TeacherRecord> records,
    const LabelSchema& schema);

// Label indices of one example; -1 entries when unlabeled.
struct EncodedLabels {
  int intent = -1;
  std::vector<int> slots;
};
EncodedLabels encode_labels(const Example& example, const LabelSchema& schema);

struct LabeledBatch {
  PaddedFeatures features;
  std::vector<int> intents;  // batch, -1 when unlabeled
  std::vector<int> slots;    // batch x steps, -1 at padding or unlabeled
  // Raw teacher logits, present when every member has a record.
  bool has_teacher = false;
  std::vector<double> teacher_intent;  // batch x I
  std::vector<double> teacher_slots;   // batch x steps x A, zero at padding

  int batch() const { return features.batch; }
  int steps() const { return features.steps; }
  std::vector<double> mask() const;  // batch x steps
};

// Projected features for every example, computed once.
class FeatureCache {
 public:
  FeatureCache(std::span<const Example> examples, const ProjectionConfig& config);
  const ProjectedSequence& operator[](std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<ProjectedSequence> rows_;
};

// `teacher` is empty or has one entry per example (nullptr allowed only when
// no teacher targets are wanted).
LabeledBatch make_batch(std::span<const Example> examples,
                        std::span<const std::size_t> indices,
                        const FeatureCache& features, const LabelSchema& schema,
                        std::span<const TeacherRecord* const> teacher = {});

}  // namespace pqrnn

#endif  // PQRNN_DATA_H_
