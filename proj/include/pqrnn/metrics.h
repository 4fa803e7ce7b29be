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

// Intent accuracy, span-level micro F1 and exact match.

#ifndef PQRNN_METRICS_H_
#define PQRNN_METRICS_H_

#include <span>
#include <vector>

namespace pqrnn {

// A labeled slot span over token positions [start, end], both inclusive.
struct Span {
  int type = 0;
  int start = 0;
  int end = 0;
  auto operator<=>(const Span&) const = default;
};

// Decodes BIO argument indices (0 = O, 2k+1 = B-k, 2k+2 = I-k). An inside
// tag that does not continue a span of its type opens a new one.
std::vector<Span> extract_spans(std::span<const int> labels);

struct Prediction {
  int intent = -1;
  std::vector<int> slots;
};

struct Metrics {
  double intent_accuracy = 0;
  double slot_f1 = 0;
  double exact_match = 0;
  double slot_precision = 0;
  double slot_recall = 0;
  int count = 0;
};

// Throws InputError when the lists or any slot sequence differ in length.
// F1 is 1 when neither side has a span.
Metrics compute_metrics(std::span<const Prediction> predicted,
                        std::span<const Prediction> gold);

}  // namespace pqrnn

#endif  // PQRNN_METRICS_H_
