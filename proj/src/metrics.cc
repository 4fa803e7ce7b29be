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

#include "pqrnn/metrics.h"

#include <algorithm>
#include <string>

#include "pqrnn/errors.h"

namespace pqrnn {

std::vector<Span> extract_spans(std::span<const int> labels) {
  std::vector<Span> spans;
  bool open = false;
  Span cur;
  const int n = static_cast<int>(labels.size());
  for (int t = 0; t < n; ++t) {
    const int label = labels[t];
    if (label <= 0) {
      if (open) spans.push_back(cur);
      open = false;
      continue;
    }
    const int type = (label - 1) / 2;
    const bool inside = label % 2 == 0;
    if (inside && open && cur.type == type) {
      cur.end = t;
      continue;
    }
    if (open) spans.push_back(cur);
    cur = {type, t, t};
    open = true;
  }
  if (open) spans.push_back(cur);
  return spans;
}

Metrics compute_metrics(std::span<const Prediction> predicted,
                        std::span<const Prediction> gold) {
  if (predicted.size() != gold.size()) {
    throw InputError("metrics: " + std::to_string(predicted.size()) +
                     " predictions for " + std::to_string(gold.size()) +
                     " gold examples");
  }
  Metrics m;
  m.count = static_cast<int>(gold.size());
  if (m.count == 0) return m;
  long correct_intent = 0, exact = 0, tp = 0, n_pred = 0, n_gold = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Prediction& p = predicted[i];
    const Prediction& g = gold[i];
    if (p.slots.size() != g.slots.size()) {
      throw InputError("metrics: example " + std::to_string(i) + " has " +
                       std::to_string(p.slots.size()) + " predicted and " +
                       std::to_string(g.slots.size()) + " gold slots");
    }
    const bool intent_ok = p.intent == g.intent;
    correct_intent += intent_ok;
    exact += intent_ok && p.slots == g.slots;
    auto ps = extract_spans(p.slots);
    auto gs = extract_spans(g.slots);
    std::sort(ps.begin(), ps.end());
    std::sort(gs.begin(), gs.end());
    std::vector<Span> common;
    std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(),
                          std::back_inserter(common));
    tp += static_cast<long>(common.size());
    n_pred += static_cast<long>(ps.size());
    n_gold += static_cast<long>(gs.size());
  }
  m.intent_accuracy = static_cast<double>(correct_intent) / m.count;
  m.exact_match = static_cast<double>(exact) / m.count;
  if (n_pred == 0 && n_gold == 0) {
    m.slot_precision = m.slot_recall = m.slot_f1 = 1.0;
  } else {
    m.slot_precision = n_pred ? static_cast<double>(tp) / n_pred : 0.0;
    m.slot_recall = n_gold ? static_cast<double>(tp) / n_gold : 0.0;
    m.slot_f1 = 2.0 * tp / static_cast<double>(n_pred + n_gold);
  }
  return m;
}

}  // namespace pqrnn
