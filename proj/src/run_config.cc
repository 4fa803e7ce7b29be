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

#include "pqrnn/run_config.h"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pqrnn/errors.h"

namespace pqrnn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string seed_string(std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llX", static_cast<unsigned long long>(seed));
  return buf;
}

std::uint64_t parse_seed(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(v.get<long long>());
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      std::size_t used = 0;
      const std::uint64_t out = std::stoull(s, &used, 0);
      if (used == s.size()) return out;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(key + ": seed must be a non-negative integer or a hex string");
}

// Applies each present key through its setter, rejecting unknown ones.
using Setter = std::function<void(const json&)>;

void apply_keys(const json& j, const std::string& section,
                const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw ConfigError(section + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("unknown config key " + section + "." + key);
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(section + "." + key + ": " + e.what());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

}  // namespace

ordered_json to_json(const ProjectionConfig& c) {
  ordered_json j;
  j["feature_dim"] = c.feature_dim;
  j["map_mode"] = map_mode_name(c.map_mode);
  j["prefix_len"] = c.prefix_len;
  j["suffix_len"] = c.suffix_len;
  j["feature_split"] = c.feature_split;
  j["seed"] = seed_string(c.seed);
  return j;
}

ordered_json to_json(const EncoderConfig& c) {
  ordered_json j;
  j["bottleneck_dim"] = c.bottleneck_dim;
  j["state_size"] = c.state_size;
  j["num_layers"] = c.num_layers;
  j["kernel_width"] = c.kernel_width;
  j["zoneout_base"] = c.zoneout_base;
  j["projection_dropout"] = c.projection_dropout;
  j["quantize"] = c.quantize;
  j["batch_norm"] = c.batch_norm;
  j["bn_epsilon"] = c.bn_epsilon;
  j["bn_momentum"] = c.bn_momentum;
  j["quant_momentum"] = c.quant_momentum;
  return j;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["base_lr"] = c.base_lr;
  j["lr_decay_rate"] = c.lr_decay_rate;
  j["lr_decay_steps"] = c.lr_decay_steps;
  j["l2_scale"] = c.l2_scale;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["eval_every"] = c.eval_every;
  j["teacher_logit_scale"] = c.teacher_logit_scale;
  j["distill_mode"] = distill_mode_name(c.distill_mode);
  j["seed"] = seed_string(c.seed);
  return j;
}

ordered_json to_json(const DataConfig& c) {
  ordered_json j;
  j["train"] = c.train;
  j["dev"] = c.dev;
  j["test"] = c.test;
  j["schema"] = c.schema;
  j["augmented"] = c.augmented;
  j["teacher_logits"] = c.teacher_logits;
  j["dev_teacher_logits"] = c.dev_teacher_logits;
  j["augment_ratio"] = c.augment_ratio;
  j["allow_any_ratio"] = c.allow_any_ratio;
  return j;
}

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["projection"] = to_json(c.projection);
  j["encoder"] = to_json(c.encoder);
  j["num_intents"] = c.num_intents;
  j["num_args"] = c.num_args;
  return j;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["projection"] = to_json(c.projection);
  j["encoder"] = to_json(c.encoder);
  j["train"] = to_json(c.train);
  j["data"] = to_json(c.data);
  j["out_dir"] = c.out_dir;
  return j;
}

void update_from_json(ProjectionConfig& c, const json& j) {
  apply_keys(j, "projection",
             {{"feature_dim", set(c.feature_dim)},
              {"map_mode",
               [&c](const json& v) {
                 c.map_mode = parse_map_mode(v.get<std::string>());
               }},
              {"prefix_len", set(c.prefix_len)},
              {"suffix_len", set(c.suffix_len)},
              {"feature_split", set(c.feature_split)},
              {"seed", [&c](const json& v) { c.seed = parse_seed(v, "projection.seed"); }}});
}

void update_from_json(EncoderConfig& c, const json& j) {
  apply_keys(j, "encoder",
             {{"bottleneck_dim", set(c.bottleneck_dim)},
              {"state_size", set(c.state_size)},
              {"num_layers", set(c.num_layers)},
              {"kernel_width", set(c.kernel_width)},
              {"zoneout_base", set(c.zoneout_base)},
              {"projection_dropout", set(c.projection_dropout)},
              {"quantize", set(c.quantize)},
              {"batch_norm", set(c.batch_norm)},
              {"bn_epsilon", set(c.bn_epsilon)},
              {"bn_momentum", set(c.bn_momentum)},
              {"quant_momentum", set(c.quant_momentum)}});
}

void update_from_json(TrainConfig& c, const json& j) {
  apply_keys(j, "train",
             {{"base_lr", set(c.base_lr)},
              {"lr_decay_rate", set(c.lr_decay_rate)},
              {"lr_decay_steps", set(c.lr_decay_steps)},
              {"l2_scale", set(c.l2_scale)},
              {"steps", set(c.steps)},
              {"batch_size", set(c.batch_size)},
              {"adam_beta1", set(c.adam_beta1)},
              {"adam_beta2", set(c.adam_beta2)},
              {"adam_epsilon", set(c.adam_epsilon)},
              {"eval_every", set(c.eval_every)},
              {"teacher_logit_scale", set(c.teacher_logit_scale)},
              {"distill_mode",
               [&c](const json& v) {
                 c.distill_mode = parse_distill_mode(v.get<std::string>());
               }},
              {"seed", [&c](const json& v) { c.seed = parse_seed(v, "train.seed"); }}});
}

void update_from_json(DataConfig& c, const json& j) {
  apply_keys(j, "data",
             {{"train", set(c.train)},
              {"dev", set(c.dev)},
              {"test", set(c.test)},
              {"schema", set(c.schema)},
              {"augmented", set(c.augmented)},
              {"teacher_logits", set(c.teacher_logits)},
              {"dev_teacher_logits", set(c.dev_teacher_logits)},
              {"augment_ratio", set(c.augment_ratio)},
              {"allow_any_ratio", set(c.allow_any_ratio)}});
}

void update_from_json(RunConfig& c, const json& j) {
  apply_keys(j, "config",
             {{"projection", [&c](const json& v) { update_from_json(c.projection, v); }},
              {"encoder", [&c](const json& v) { update_from_json(c.encoder, v); }},
              {"train", [&c](const json& v) { update_from_json(c.train, v); }},
              {"data", [&c](const json& v) { update_from_json(c.data, v); }},
              {"out_dir", set(c.out_dir)}});
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  apply_keys(j, "model",
             {{"projection", [&c](const json& v) { update_from_json(c.projection, v); }},
              {"encoder", [&c](const json& v) { update_from_json(c.encoder, v); }},
              {"num_intents", set(c.num_intents)},
              {"num_args", set(c.num_args)}});
  c.validate();
  return c;
}

void RunConfig::validate() const {
  projection.validate();
  encoder.validate();
  train.validate();
  if (data.augment_ratio < 0) throw ConfigError("augment_ratio must be >= 0");
  const int r = data.augment_ratio;
  if (r != 0 && !data.allow_any_ratio && r != 1 && r != 4 && r != 8) {
    throw ConfigError("augment_ratio must be 1, 4 or 8, got " + std::to_string(r));
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  RunConfig c;
  update_from_json(c, j);
  c.validate();
  return c;
}

void save_run_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << to_json(config).dump(2) << '\n';
}

}  // namespace pqrnn
