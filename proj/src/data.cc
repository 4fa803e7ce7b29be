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

#include "pqrnn/data.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pqrnn/errors.h"

namespace pqrnn {

using nlohmann::json;

namespace {

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(const std::string& path, int line) {
  return path + ":" + std::to_string(line) + ": ";
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Strips a trailing CR so CRLF files are tolerated.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

LabelSchema::LabelSchema(std::vector<std::string> intents,
                         std::vector<std::string> slot_types)
    : intents_(std::move(intents)), slot_types_(std::move(slot_types)) {
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    if (!valid_name(intents_[i])) {
      throw ConfigError("invalid intent name '" + intents_[i] + "'");
    }
    if (!intent_index_.emplace(intents_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate intent " + intents_[i]);
    }
  }
  arg_labels_.push_back("O");
  for (const auto& type : slot_types_) {
    if (!valid_name(type)) throw ConfigError("invalid slot type '" + type + "'");
    arg_labels_.push_back("B-" + type);
    arg_labels_.push_back("I-" + type);
  }
  for (std::size_t i = 0; i < arg_labels_.size(); ++i) {
    if (!arg_index_.emplace(arg_labels_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate slot type in " + arg_labels_[i]);
    }
  }
}

LabelSchema LabelSchema::infer(std::span<const Example> examples) {
  std::vector<std::string> intents, types;
  std::set<std::string, std::less<>> seen_intents, seen_types;
  for (const auto& ex : examples) {
    if (!ex.labeled()) continue;
    if (seen_intents.insert(ex.intent).second) intents.push_back(ex.intent);
    for (const auto& tag : ex.slots) {
      if (tag == "O") continue;
      std::string type = tag.substr(2);
      if (seen_types.insert(type).second) types.push_back(std::move(type));
    }
  }
  return LabelSchema(std::move(intents), std::move(types));
}

int LabelSchema::intent_index(std::string_view name) const {
  auto it = intent_index_.find(name);
  return it == intent_index_.end() ? -1 : it->second;
}

int LabelSchema::arg_index(std::string_view label) const {
  auto it = arg_index_.find(label);
  return it == arg_index_.end() ? -1 : it->second;
}

std::string schema_to_json(const LabelSchema& schema) {
  json j;
  j["intents"] = schema.intents();
  j["slot_types"] = schema.slot_types();
  return j.dump(2) + "\n";
}

LabelSchema schema_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("intents") || !j.contains("slot_types")) {
    throw DataError("schema must be an object with intents and slot_types");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "intents" && key != "slot_types") {
      throw DataError("unknown schema key " + key);
    }
  }
  try {
    return LabelSchema(j["intents"].get<std::vector<std::string>>(),
                       j["slot_types"].get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("schema lists must hold strings: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("bad schema: ") + e.what());
  }
}

LabelSchema load_schema(const std::string& path) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return schema_from_json(buffer.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_schema(const std::string& path, const LabelSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << schema_to_json(schema);
}

std::vector<std::string> tokenize(std::string_view query) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (i < query.size()) {
    while (i < query.size() && space(query[i])) ++i;
    std::size_t j = i;
    while (j < query.size() && !space(query[j])) ++j;
    if (j > i) tokens.emplace_back(query.substr(i, j - i));
    i = j;
  }
  if (tokens.empty()) throw InputError("query has no tokens");
  return tokens;
}

void normalize_bio(std::vector<std::string>& tags) {
  std::string prev_type;  // type of the running span, empty after O
  for (auto& tag : tags) {
    if (tag == "O") {
      prev_type.clear();
      continue;
    }
    if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
      throw InputError("malformed BIO tag '" + tag + "'");
    }
    std::string type = tag.substr(2);
    if (tag[0] == 'I' && type != prev_type) tag[0] = 'B';
    prev_type = std::move(type);
  }
}

namespace {

Example parse_labeled(const std::vector<std::string>& cols,
                      const std::string& path, int lineno) {
  Example ex;
  ex.id = cols[0];
  if (ex.id.empty()) throw DataError(where(path, lineno) + "empty id");
  try {
    ex.tokens = tokenize(cols[1]);
  } catch (const InputError&) {
    throw DataError(where(path, lineno) + "no tokens");
  }
  ex.intent = cols[2];
  if (!valid_name(ex.intent)) {
    throw DataError(where(path, lineno) + "invalid intent '" + ex.intent + "'");
  }
  std::istringstream tags(cols[3]);
  for (std::string tag; tags >> tag;) ex.slots.push_back(tag);
  if (ex.slots.size() != ex.tokens.size()) {
    throw DataError(where(path, lineno) + std::to_string(ex.slots.size()) +
                    " slot tags for " + std::to_string(ex.tokens.size()) +
                    " tokens");
  }
  try {
    normalize_bio(ex.slots);
  } catch (const InputError& e) {
    throw DataError(where(path, lineno) + e.what());
  }
  return ex;
}

}  // namespace

Dataset load_dataset(const std::string& path, const LabelSchema* schema) {
  auto in = open_input(path);
  Dataset out;
  std::set<std::string, std::less<>> ids;
  std::string line;
  for (int lineno = 1; next_line(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw DataError(where(path, lineno) + "expected 4 tab-separated columns, got " +
                      std::to_string(cols.size()));
    }
    Example ex = parse_labeled(cols, path, lineno);
    if (!ids.insert(ex.id).second) {
      throw DataError(where(path, lineno) + "duplicate id " + ex.id);
    }
    if (schema) {
      if (schema->intent_index(ex.intent) < 0) {
        throw DataError(where(path, lineno) + "unknown intent " + ex.intent);
      }
      for (const auto& tag : ex.slots) {
        if (schema->arg_index(tag) < 0) {
          throw DataError(where(path, lineno) + "unknown slot label " + tag);
        }
      }
    }
    out.examples.push_back(std::move(ex));
  }
  if (out.examples.empty()) throw DataError(path + ": no examples");
  try {
    out.schema = schema ? *schema : LabelSchema::infer(out.examples);
  } catch (const ConfigError& e) {
    throw DataError(path + ": " + e.what());
  }
  return out;
}

std::vector<Example> load_queries(const std::string& path, Origin origin) {
  auto in = open_input(path);
  std::vector<Example> out;
  std::string line;
  for (int lineno = 1; next_line(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    Example ex;
    if (cols.size() == 4) {
      ex = parse_labeled(cols, path, lineno);
    } else if (cols.size() == 2) {
      ex.id = cols[0];
      if (ex.id.empty()) throw DataError(where(path, lineno) + "empty id");
      try {
        ex.tokens = tokenize(cols[1]);
      } catch (const InputError&) {
        throw DataError(where(path, lineno) + "no tokens");
      }
    } else {
      throw DataError(where(path, lineno) + "expected 2 or 4 columns, got " +
                      std::to_string(cols.size()));
    }
    ex.origin = origin;
    out.push_back(std::move(ex));
  }
  return out;
}

void write_dataset(const std::string& path, std::span<const Example> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& ex : examples) {
    out << ex.id << '\t' << join(ex.tokens, ' ');
    if (ex.labeled()) out << '\t' << ex.intent << '\t' << join(ex.slots, ' ');
    out << '\n';
  }
}

std::vector<Example> merge_augmented(std::span<const Example> supervised,
                                     std::span<const Example> augmented,
                                     int ratio, std::uint64_t seed,
                                     bool allow_any_ratio, std::string* warning) {
  if (ratio < 0) throw ConfigError("augment ratio must be >= 0");
  if (ratio != 0 && !allow_any_ratio && ratio != 1 && ratio != 4 && ratio != 8) {
    throw ConfigError("augment ratio must be 1, 4 or 8, got " +
                      std::to_string(ratio));
  }
  std::vector<Example> out(supervised.begin(), supervised.end());
  if (ratio == 0) return out;
  const std::size_t wanted = static_cast<std::size_t>(ratio) * supervised.size();
  if (augmented.size() < wanted && warning) {
    *warning = "augmented pool holds " + std::to_string(augmented.size()) +
               " queries, " + std::to_string(wanted) + " requested; using all";
  }
  std::vector<std::size_t> order(augmented.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(wanted, order.size()));
  for (std::size_t i : order) {
    out.push_back(augmented[i]);
    out.back().origin = Origin::kAugmented;
  }
  return out;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9e", v);
  out += buf;
}

}  // namespace

std::string teacher_record_to_json(const TeacherRecord& record) {
  std::string out = "{\"id\": " + json(record.id).dump() +
                    ", \"tokens\": " + json(record.tokens).dump() +
                    ", \"intent_logits\": [";
  for (std::size_t i = 0; i < record.intent_logits.size(); ++i) {
    if (i) out += ", ";
    append_number(out, record.intent_logits[i]);
  }
  out += "], \"slot_logits\": [";
  for (std::size_t t = 0; t < record.slot_logits.size(); ++t) {
    if (t) out += ", ";
    out += '[';
    for (std::size_t a = 0; a < record.slot_logits[t].size(); ++a) {
      if (a) out += ", ";
      append_number(out, record.slot_logits[t][a]);
    }
    out += ']';
  }
  out += "]}";
  return out;
}

TeacherRecord teacher_record_from_json(std::string_view line) {
  TeacherRecord r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.intent_logits = j.at("intent_logits").get<std::vector<double>>();
    r.slot_logits = j.at("slot_logits").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad teacher record: ") + e.what());
  }
  return r;
}

std::vector<TeacherRecord> read_teacher_jsonl(const std::string& path) {
  auto in = open_input(path);
  std::vector<TeacherRecord> out;
  std::string line;
  for (int lineno = 1; next_line(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      out.push_back(teacher_record_from_json(line));
    } catch (const DataError& e) {
      throw DataError(where(path, lineno) + e.what());
    }
  }
  return out;
}

void write_teacher_jsonl(const std::string& path,
                         std::span<const TeacherRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : records) out << teacher_record_to_json(r) << '\n';
}

std::vector<const TeacherRecord*> align_teacher(
    std::span<const Example> examples, std::span<const TeacherRecord> records,
    const LabelSchema& schema) {
  std::map<std::string_view, const TeacherRecord*> by_id;
  std::vector<std::string> problems;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) {
      problems.push_back(r.id + ": duplicate teacher record");
    }
  }
  std::vector<const TeacherRecord*> out;
  out.reserve(examples.size());
  const std::size_t intents = schema.num_intents(), args = schema.num_args();
  for (const auto& ex : examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) {
      problems.push_back(ex.id + ": missing teacher record");
      out.push_back(nullptr);
      continue;
    }
    const TeacherRecord& r = *it->second;
    if (r.slot_logits.size() != ex.tokens.size()) {
      problems.push_back(ex.id + ": teacher has " +
                         std::to_string(r.slot_logits.size()) +
                         " token rows, example has " +
                         std::to_string(ex.tokens.size()) + " tokens");
    } else if (!r.tokens.empty() && r.tokens != ex.tokens) {
      problems.push_back(ex.id + ": teacher tokens differ from example tokens");
    }
    if (r.intent_logits.size() != intents) {
      problems.push_back(ex.id + ": " + std::to_string(r.intent_logits.size()) +
                         " intent logits, schema has " +
                         std::to_string(intents) + " intents");
    }
    for (const auto& row : r.slot_logits) {
      if (row.size() != args) {
        problems.push_back(ex.id + ": slot logit row of width " +
                           std::to_string(row.size()) + ", schema has " +
                           std::to_string(args) + " labels");
        break;
      }
    }
    out.push_back(&r);
  }
  if (!problems.empty()) {
    std::string msg = "teacher alignment failed for " +
                      std::to_string(problems.size()) + " record(s):";
    const std::size_t shown = std::min<std::size_t>(problems.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + problems[i];
    if (shown < problems.size()) {
      msg += "\n  ... and " + std::to_string(problems.size() - shown) + " more";
    }
    throw AlignmentError(msg);
  }
  return out;
}

EncodedLabels encode_labels(const Example& example, const LabelSchema& schema) {
  EncodedLabels out;
  out.slots.assign(example.tokens.size(), -1);
  if (!example.labeled()) return out;
  out.intent = schema.intent_index(example.intent);
  if (out.intent < 0) {
    throw DataError(example.id + ": intent " + example.intent + " not in schema");
  }
  for (std::size_t t = 0; t < example.slots.size(); ++t) {
    out.slots[t] = schema.arg_index(example.slots[t]);
    if (out.slots[t] < 0) {
      throw DataError(example.id + ": slot label " + example.slots[t] +
                      " not in schema");
    }
  }
  return out;
}

std::vector<double> LabeledBatch::mask() const {
  std::vector<double> m(static_cast<std::size_t>(batch()) * steps(), 0.0);
  for (int b = 0; b < batch(); ++b) {
    std::fill_n(m.begin() + static_cast<std::size_t>(b) * steps(),
                features.lengths[b], 1.0);
  }
  return m;
}

FeatureCache::FeatureCache(std::span<const Example> examples,
                           const ProjectionConfig& config) {
  rows_.reserve(examples.size());
  for (const auto& ex : examples) rows_.push_back(project_sequence(ex.tokens, config));
}

LabeledBatch make_batch(std::span<const Example> examples,
                        std::span<const std::size_t> indices,
                        const FeatureCache& features, const LabelSchema& schema,
                        std::span<const TeacherRecord* const> teacher) {
  if (indices.empty()) throw InputError("make_batch: empty batch");
  std::vector<const ProjectedSequence*> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) rows.push_back(&features[i]);
  LabeledBatch out;
  out.features = pad_sequences(rows);
  const int steps = out.steps();
  out.slots.assign(indices.size() * steps, -1);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const EncodedLabels labels = encode_labels(examples[indices[b]], schema);
    out.intents.push_back(labels.intent);
    std::copy(labels.slots.begin(), labels.slots.end(),
              out.slots.begin() + b * steps);
  }
  if (teacher.empty()) return out;
  out.has_teacher = std::all_of(indices.begin(), indices.end(),
                                [&](std::size_t i) { return teacher[i] != nullptr; });
  if (!out.has_teacher) return out;
  const int intents = schema.num_intents(), args = schema.num_args();
  out.teacher_intent.resize(indices.size() * intents);
  out.teacher_slots.assign(indices.size() * steps * args, 0.0);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const TeacherRecord& r = *teacher[indices[b]];
    std::copy(r.intent_logits.begin(), r.intent_logits.end(),
              out.teacher_intent.begin() + b * intents);
    for (std::size_t t = 0; t < r.slot_logits.size(); ++t) {
      std::copy(r.slot_logits[t].begin(), r.slot_logits[t].end(),
                out.teacher_slots.begin() + (b * steps + t) * args);
    }
  }
  return out;
}

}  // namespace pqrnn
