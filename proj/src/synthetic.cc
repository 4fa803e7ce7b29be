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

#include "pqrnn/synthetic.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "pqrnn/errors.h"

namespace pqrnn {

namespace {

constexpr int kValuesPerPool = 6;
constexpr int kWordsPerPool = 8;  // four one-token and two two-token values
constexpr int kMinFillers = 10;

int pools_for(int slot_types) { return (slot_types + 1) / 2; }

int words_needed(const SyntheticConfig& c) {
  return 2 * c.num_intents + c.num_slot_types +
         pools_for(c.num_slot_types) * kWordsPerPool + kMinFillers;
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<std::string> make_vocabulary(int size, std::mt19937_64& rng) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n",
                                  "p", "r", "s", "t", "v", "z", "sh", "tr"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < size) {
    std::string w;
    const int syllables = uniform(rng, 2, 3);
    for (int s = 0; s < syllables; ++s) {
      w += kOnsets[uniform(rng, 0, 15)];
      w += kVowels[uniform(rng, 0, 6)];
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

struct Grammar {
  std::vector<std::array<std::string, 2>> triggers;       // per intent
  std::vector<std::vector<int>> intent_slots;             // per intent
  std::vector<std::string> cues;                          // per slot type
  std::vector<std::vector<std::vector<std::string>>> pools;  // per pool
  std::vector<std::string> fillers;
};

Grammar make_grammar(const SyntheticConfig& c, std::mt19937_64& rng) {
  const auto words = make_vocabulary(c.vocab_size, rng);
  std::size_t next = 0;
  Grammar g;
  for (int i = 0; i < c.num_intents; ++i) {
    g.triggers.push_back({words[next], words[next + 1]});
    next += 2;
  }
  for (int s = 0; s < c.num_slot_types; ++s) g.cues.push_back(words[next++]);
  for (int p = 0; p < pools_for(c.num_slot_types); ++p) {
    std::vector<std::vector<std::string>> pool;
    for (int v = 0; v < kValuesPerPool; ++v) {
      if (v < 4) {
        pool.push_back({words[next++]});
      } else {
        pool.push_back({words[next], words[next + 1]});
        next += 2;
      }
    }
    g.pools.push_back(std::move(pool));
  }
  g.fillers.assign(words.begin() + next, words.end());
  std::vector<int> types(c.num_slot_types);
  for (int s = 0; s < c.num_slot_types; ++s) types[s] = s;
  const int per_intent = std::min(c.slots_per_intent, c.num_slot_types);
  for (int i = 0; i < c.num_intents; ++i) {
    std::shuffle(types.begin(), types.end(), rng);
    std::vector<int> chosen(types.begin(), types.begin() + per_intent);
    std::sort(chosen.begin(), chosen.end());
    g.intent_slots.push_back(std::move(chosen));
  }
  return g;
}

void add_fillers(const Grammar& g, int max_count, std::mt19937_64& rng,
                 Example& ex) {
  const int n = uniform(rng, 0, max_count);
  for (int k = 0; k < n; ++k) {
    ex.tokens.push_back(g.fillers[uniform(rng, 0, static_cast<int>(g.fillers.size()) - 1)]);
    ex.slots.push_back("O");
  }
}

Example make_example(const Grammar& g, const LabelSchema& schema, int intent,
                     std::mt19937_64& rng) {
  Example ex;
  ex.intent = schema.intents()[intent];
  // The trigger and 1-2 slot phrases in random order.
  const auto& allowed = g.intent_slots[intent];
  std::vector<int> slots = allowed;
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min<std::size_t>(slots.size(), uniform(rng, 1, 2)));
  std::vector<int> parts = slots;
  parts.push_back(-1);
  std::shuffle(parts.begin(), parts.end(), rng);
  add_fillers(g, 2, rng, ex);
  for (int part : parts) {
    if (part < 0) {
      ex.tokens.push_back(g.triggers[intent][uniform(rng, 0, 1)]);
      ex.slots.push_back("O");
    } else {
      ex.tokens.push_back(g.cues[part]);
      ex.slots.push_back("O");
      const auto& pool = g.pools[part / 2];
      const auto& value = pool[uniform(rng, 0, static_cast<int>(pool.size()) - 1)];
      const std::string& type = schema.slot_types()[part];
      for (std::size_t w = 0; w < value.size(); ++w) {
        ex.tokens.push_back(value[w]);
        ex.slots.push_back((w == 0 ? "B-" : "I-") + type);
      }
    }
    add_fillers(g, 1, rng, ex);
  }
  return ex;
}

std::vector<Example> make_split(const Grammar& g, const LabelSchema& schema,
                                int count, const char* prefix,
                                std::mt19937_64& rng) {
  // Round-robin intents so every intent is present, then shuffle.
  std::vector<int> intents(count);
  for (int i = 0; i < count; ++i) intents[i] = i % schema.num_intents();
  std::shuffle(intents.begin(), intents.end(), rng);
  std::vector<Example> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Example ex = make_example(g, schema, intents[i], rng);
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%05d", prefix, i);
    ex.id = id;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (num_intents < 1 || num_slot_types < 1 || slots_per_intent < 1) {
    throw ConfigError("synthetic grammar needs at least one intent and slot type");
  }
  if (num_train < 1 || num_dev < 0 || num_test < 0 || num_augmented < 0) {
    throw ConfigError("synthetic split sizes must be non-negative, train >= 1");
  }
  if (vocab_size < words_needed(*this)) {
    throw ConfigError("vocab_size " + std::to_string(vocab_size) +
                      " too small, need at least " +
                      std::to_string(words_needed(*this)));
  }
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const Grammar g = make_grammar(config, rng);
  std::vector<std::string> intents, types;
  for (int i = 0; i < config.num_intents; ++i) {
    intents.push_back("intent_" + std::to_string(i));
  }
  for (int s = 0; s < config.num_slot_types; ++s) {
    types.push_back("slot_" + std::to_string(s));
  }
  SyntheticData data;
  data.schema = LabelSchema(intents, types);
  data.train = make_split(g, data.schema, config.num_train, "train", rng);
  data.dev = make_split(g, data.schema, config.num_dev, "dev", rng);
  data.test = make_split(g, data.schema, config.num_test, "test", rng);
  data.augmented = make_split(g, data.schema, config.num_augmented, "aug", rng);
  for (auto& ex : data.augmented) {
    ex.intent.clear();
    ex.slots.clear();
    ex.origin = Origin::kAugmented;
  }
  return data;
}

void write_synthetic(const std::string& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  write_dataset((root / "train.tsv").string(), data.train);
  write_dataset((root / "dev.tsv").string(), data.dev);
  write_dataset((root / "test.tsv").string(), data.test);
  write_dataset((root / "augmented.tsv").string(), data.augmented);
  save_schema((root / "schema.json").string(), data.schema);
}

}  // namespace pqrnn
