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


#include <vector>

#include "doctest.h"
#include "pqrnn/errors.h"
#include "pqrnn/metrics.h"

using namespace pqrnn;

// Labels: 0 = O, 1 = B-0, 2 = I-0, 3 = B-1, 4 = I-1.

TEST_CASE("span extraction") {
  const int labels[] = {1, 2, 0, 3, 4, 4, 1};
  CHECK(extract_spans(labels) == std::vector<Span>{{0, 0, 1}, {1, 3, 5}, {0, 6, 6}});
  // Inside tags that do not continue their type open a new span.
  const int loose[] = {2, 4, 2, 0, 4};
  CHECK(extract_spans(loose) == std::vector<Span>{{0, 0, 0}, {1, 1, 1}, {0, 2, 2}, {1, 4, 4}});
  const int adjacent[] = {1, 1, 2};
  CHECK(extract_spans(adjacent) == std::vector<Span>{{0, 0, 0}, {0, 1, 2}});
  const int none[] = {0, 0};
  CHECK(extract_spans(none).empty());
}

TEST_CASE("metrics on a worked example") {
  // Gold has three spans; the prediction finds two of them exactly and
  // misses the third.
  std::vector<Prediction> gold = {{0, {1, 2, 0, 3}}, {1, {0, 3, 4, 0}}};
  std::vector<Prediction> pred = {{0, {1, 2, 0, 0}}, {0, {0, 3, 4, 0}}};
  const auto m = compute_metrics(pred, gold);
  CHECK(m.count == 2);
  CHECK(m.intent_accuracy == doctest::Approx(0.5));
  CHECK(m.slot_precision == doctest::Approx(1.0));
  CHECK(m.slot_recall == doctest::Approx(2.0 / 3));
  CHECK(m.slot_f1 == doctest::Approx(0.8));
  // First query misses a span, second has the wrong intent.
  CHECK(m.exact_match == 0.0);
}

TEST_CASE("boundary errors count as both a false positive and a false negative") {
  std::vector<Prediction> gold = {{0, {1, 2, 2}}};
  std::vector<Prediction> pred = {{0, {1, 2, 0}}};
  const auto m = compute_metrics(pred, gold);
  CHECK(m.slot_precision == 0.0);
  CHECK(m.slot_recall == 0.0);
  CHECK(m.slot_f1 == 0.0);
  CHECK(m.intent_accuracy == 1.0);
}

TEST_CASE("perfect and empty predictions") {
  std::vector<Prediction> gold = {{2, {0, 1, 0}}, {1, {0, 0}}};
  const auto perfect = compute_metrics(gold, gold);
  CHECK(perfect.intent_accuracy == 1.0);
  CHECK(perfect.slot_f1 == 1.0);
  CHECK(perfect.exact_match == 1.0);

  std::vector<Prediction> no_spans = {{0, {0, 0}}};
  CHECK(compute_metrics(no_spans, no_spans).slot_f1 == 1.0);
  std::vector<Prediction> spurious = {{0, {3, 0}}};
  const auto m = compute_metrics(spurious, no_spans);
  CHECK(m.slot_f1 == 0.0);
  CHECK(m.exact_match == 0.0);
}

TEST_CASE("metric input validation") {
  std::vector<Prediction> one = {{0, {0}}};
  std::vector<Prediction> two = {{0, {0}}, {0, {0}}};
  CHECK_THROWS_AS(compute_metrics(one, two), InputError);
  std::vector<Prediction> longer = {{0, {0, 0}}};
  CHECK_THROWS_AS(compute_metrics(longer, one), InputError);
}
