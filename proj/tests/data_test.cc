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


#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pqrnn/errors.h"
#include "pqrnn/data.h"

using namespace pqrnn;
namespace fs = std::filesystem;

namespace {

// Fresh directory per test case, removed on exit.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("pqrnn_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path / name).string();
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }
};

const char* kValid =
    "q1\tshow flights to boston\tflight\tO O O B-city\n"
    "q2\tcheapest fare from new york\tairfare\tB-cost O O B-city I-city\n"
    "q3\tboston\tflight\tB-city\n";

// Message of the DataError thrown by `fn`, or "" when nothing is thrown.
template <typename Fn>
std::string data_error(Fn fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("schema indices and argument labels") {
  LabelSchema s({"flight", "airfare"}, {"city", "cost"});
  CHECK(s.num_intents() == 2);
  CHECK(s.arg_labels() == std::vector<std::string>{"O", "B-city", "I-city", "B-cost", "I-cost"});
  CHECK(s.num_args() == 5);
  CHECK(s.intent_index("airfare") == 1);
  CHECK(s.intent_index("nope") == -1);
  CHECK(s.arg_index("I-cost") == 4);
  CHECK(s.arg_index("B-time") == -1);
  CHECK_THROWS_AS(LabelSchema({"a", "a"}, {}), ConfigError);
  CHECK_THROWS_AS(LabelSchema({"a"}, {"x", "x"}), ConfigError);
  CHECK_THROWS_AS(LabelSchema({"a b"}, {}), ConfigError);
  CHECK_THROWS_AS(LabelSchema({""}, {}), ConfigError);
}

TEST_CASE("schema JSON round trip") {
  TempDir dir;
  LabelSchema s({"flight", "airfare"}, {"city", "cost"});
  const auto path = (dir.path / "schema.json").string();
  save_schema(path, s);
  CHECK(load_schema(path) == s);
  const auto j = nlohmann::json::parse(schema_to_json(s));
  CHECK(j["intents"] == nlohmann::json({"flight", "airfare"}));
  CHECK(j["slot_types"] == nlohmann::json({"city", "cost"}));
  CHECK_THROWS_AS(schema_from_json("{\"intents\": [\"a\"], \"slot_types\": [], \"x\": 1}"),
                  DataError);
  CHECK_THROWS_AS(schema_from_json("[1, 2]"), DataError);
  CHECK_THROWS_AS(schema_from_json("{\"intents\": [1], \"slot_types\": []}"), DataError);
  CHECK_THROWS_AS(schema_from_json("not json"), DataError);
}

TEST_CASE("tokenize and BIO normalization") {
  CHECK(tokenize("  show   me\tflights ") == std::vector<std::string>{"show", "me", "flights"});
  CHECK_THROWS_AS(tokenize("   "), InputError);
  std::vector<std::string> tags = {"I-city", "I-city", "O", "I-time", "B-city", "I-time"};
  normalize_bio(tags);
  CHECK(tags == std::vector<std::string>{"B-city", "I-city", "O", "B-time", "B-city", "B-time"});
  auto again = tags;
  normalize_bio(again);
  CHECK(again == tags);
  std::vector<std::string> bad = {"X-city"};
  CHECK_THROWS_AS(normalize_bio(bad), InputError);
  std::vector<std::string> empty_type = {"B-"};
  CHECK_THROWS_AS(normalize_bio(empty_type), InputError);
}

TEST_CASE("dataset parsing") {
  TempDir dir;
  const auto path = dir.write("train.tsv", kValid);
  const auto ds = load_dataset(path);
  REQUIRE(ds.examples.size() == 3);
  const auto& ex = ds.examples[1];
  CHECK(ex.id == "q2");
  CHECK(ex.tokens == std::vector<std::string>{"cheapest", "fare", "from", "new", "york"});
  CHECK(ex.intent == "airfare");
  CHECK(ex.slots == std::vector<std::string>{"B-cost", "O", "O", "B-city", "I-city"});
  CHECK(ex.origin == Origin::kSupervised);
  // Schema in order of first appearance.
  CHECK(ds.schema.intents() == std::vector<std::string>{"flight", "airfare"});
  CHECK(ds.schema.slot_types() == std::vector<std::string>{"city", "cost"});

  std::string crlf = kValid;
  for (std::size_t pos = 0; (pos = crlf.find('\n', pos)) != std::string::npos; pos += 2) {
    crlf.insert(pos, "\r");
  }
  CHECK(load_dataset(dir.write("crlf.tsv", crlf)).examples == ds.examples);

  const auto labels = encode_labels(ex, ds.schema);
  CHECK(labels.intent == 1);
  CHECK(labels.slots == std::vector<int>{3, 0, 0, 1, 2});
}

TEST_CASE("dataset errors name the file and line") {
  TempDir dir;
  const auto three_cols = dir.write("a.tsv", "q1\tshow flights\tflight\tO O\nq2\tboston\tflight\n");
  CHECK(data_error([&] { load_dataset(three_cols); }).find("a.tsv:2:") != std::string::npos);
  const auto mismatch = dir.write("b.tsv", "q1\tshow flights\tflight\tO\n");
  const auto msg = data_error([&] { load_dataset(mismatch); });
  CHECK(msg.find("b.tsv:1:") != std::string::npos);
  CHECK(msg.find("1 slot tags for 2 tokens") != std::string::npos);
  const auto dup = dir.write("c.tsv", "q1\ta\tx\tO\nq1\tb\tx\tO\n");
  CHECK(data_error([&] { load_dataset(dup); }).find("duplicate id q1") != std::string::npos);
  CHECK(data_error([&] { load_dataset(dir.write("d.tsv", "")); }).find("no examples") !=
        std::string::npos);
  CHECK(data_error([&] { load_dataset((dir.path / "missing.tsv").string()); })
            .find("cannot open") != std::string::npos);
  const auto bad_tag = dir.write("e.tsv", "q1\ta\tx\tZ-city\n");
  CHECK(data_error([&] { load_dataset(bad_tag); }).find("e.tsv:1:") != std::string::npos);

  LabelSchema schema({"flight"}, {"city"});
  const auto unknown = dir.write("f.tsv", "q1\tboston\tairfare\tB-city\n");
  CHECK(data_error([&] { load_dataset(unknown, &schema); }).find("unknown intent airfare") !=
        std::string::npos);
  const auto unknown_slot = dir.write("g.tsv", "q1\tboston\tflight\tB-time\n");
  CHECK(data_error([&] { load_dataset(unknown_slot, &schema); })
            .find("unknown slot label B-time") != std::string::npos);
}

TEST_CASE("dataset and query round trip") {
  TempDir dir;
  const auto ds = load_dataset(dir.write("train.tsv", kValid));
  const auto out = (dir.path / "copy.tsv").string();
  write_dataset(out, ds.examples);
  CHECK(load_dataset(out).examples == ds.examples);

  std::vector<Example> unlabeled = {{"u1", {"hello", "there"}, "", {}, Origin::kAugmented, ""}};
  const auto qpath = (dir.path / "queries.tsv").string();
  write_dataset(qpath, unlabeled);
  std::ifstream in(qpath);
  std::string line;
  std::getline(in, line);
  CHECK(line == "u1\thello there");
  const auto queries = load_queries(qpath, Origin::kAugmented);
  REQUIRE(queries.size() == 1);
  CHECK(!queries[0].labeled());
  CHECK(queries[0].origin == Origin::kAugmented);
  const auto labeled = load_queries(out, Origin::kAugmented);
  CHECK(labeled[0].intent == "flight");
  CHECK_THROWS_AS(load_queries(dir.write("bad.tsv", "u1\ta\tb\n"), Origin::kAugmented),
                  DataError);
}

TEST_CASE("augmented merge") {
  std::vector<Example> sup(10), aug(50);
  for (int i = 0; i < 10; ++i) sup[i] = {"s" + std::to_string(i), {"a"}, "x", {"O"}};
  for (int i = 0; i < 50; ++i) aug[i] = {"a" + std::to_string(i), {"b"}, "", {}};
  CHECK(merge_augmented(sup, aug, 0, 1).size() == 10);
  const auto four = merge_augmented(sup, aug, 4, 1);
  REQUIRE(four.size() == 50);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < four.size(); ++i) {
    ids.insert(four[i].id);
    CHECK(four[i].origin == (i < 10 ? Origin::kSupervised : Origin::kAugmented));
  }
  CHECK(ids.size() == 50);
  CHECK(merge_augmented(sup, aug, 4, 1) == four);
  CHECK(merge_augmented(sup, aug, 4, 2) != four);
  std::string warning;
  CHECK(merge_augmented(sup, aug, 8, 1, false, &warning).size() == 60);
  CHECK(warning.find("50") != std::string::npos);
  CHECK_THROWS_AS(merge_augmented(sup, aug, 2, 1), ConfigError);
  CHECK(merge_augmented(sup, aug, 2, 1, true).size() == 30);
  CHECK_THROWS_AS(merge_augmented(sup, aug, -1, 1, true), ConfigError);
}

TEST_CASE("teacher JSONL round trip keeps nine significant digits") {
  TempDir dir;
  std::vector<TeacherRecord> records = {
      {"q1", {"show", "me"}, {1.234567891, -0.000123456789, 3e10}, {{0.1, 0.2}, {-1.0 / 3, 2.0 / 3}}},
      {"q\"2", {"x"}, {0, 1, 2}, {{5, 6}}}};
  const auto path = (dir.path / "teacher.jsonl").string();
  write_teacher_jsonl(path, records);
  const auto back = read_teacher_jsonl(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].id == "q\"2");
  CHECK(back[0].tokens == records[0].tokens);
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = records[0].intent_logits[i], b = back[0].intent_logits[i];
    CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
  }
  CHECK(std::abs(back[0].slot_logits[1][0] + 1.0 / 3) < 1e-9);
  const auto j = nlohmann::json::parse(teacher_record_to_json(records[0]));
  for (const char* key : {"id", "tokens", "intent_logits", "slot_logits"}) CHECK(j.contains(key));

  const auto bad = dir.write("bad.jsonl", "{\"id\": \"a\"}\n");
  CHECK(data_error([&] { read_teacher_jsonl(bad); }).find("bad.jsonl:1:") != std::string::npos);
}

TEST_CASE("teacher alignment") {
  LabelSchema schema({"flight", "airfare"}, {"city"});
  std::vector<Example> examples = {{"q1", {"to", "boston"}, "flight", {"O", "B-city"}},
                                   {"q2", {"fare"}, "", {}}};
  std::vector<TeacherRecord> records = {
      {"q2", {"fare"}, {0.1, 0.2}, {{1, 2, 3}}},
      {"q1", {"to", "boston"}, {0.3, 0.4}, {{1, 2, 3}, {4, 5, 6}}}};
  const auto aligned = align_teacher(examples, records, schema);
  REQUIRE(aligned.size() == 2);
  CHECK(aligned[0]->id == "q1");
  CHECK(aligned[1]->id == "q2");

  auto expect_problem = [&](std::vector<TeacherRecord> recs, const std::string& needle) {
    try {
      align_teacher(examples, recs, schema);
      FAIL("no alignment error");
    } catch (const AlignmentError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_problem({records[0]}, "q1: missing teacher record");
  auto dup = records;
  dup.push_back(records[0]);
  expect_problem(dup, "duplicate teacher record");
  auto rows = records;
  rows[1].slot_logits.pop_back();
  expect_problem(rows, "1 token rows, example has 2 tokens");
  auto tokens = records;
  tokens[1].tokens = {"to", "denver"};
  expect_problem(tokens, "tokens differ");
  auto width = records;
  width[0].intent_logits.push_back(0);
  expect_problem(width, "3 intent logits, schema has 2 intents");
  auto slot_width = records;
  slot_width[0].slot_logits[0].pop_back();
  expect_problem(slot_width, "slot logit row of width 2");

  std::vector<Example> many;
  std::vector<TeacherRecord> none;
  for (int i = 0; i < 30; ++i) many.push_back({"m" + std::to_string(i), {"a"}, "", {}});
  try {
    align_teacher(many, none, schema);
    FAIL("no alignment error");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("30 record(s)") != std::string::npos);
    CHECK(std::string(e.what()).find("and 10 more") != std::string::npos);
  }
}

TEST_CASE("batching pads and carries teacher logits") {
  LabelSchema schema({"flight", "airfare"}, {"city"});
  std::vector<Example> examples = {{"q1", {"to", "boston"}, "flight", {"O", "B-city"}},
                                   {"q2", {"fare"}, "", {}}};
  std::vector<TeacherRecord> records = {
      {"q1", {"to", "boston"}, {0.3, 0.4}, {{1, 2, 3}, {4, 5, 6}}},
      {"q2", {"fare"}, {0.1, 0.2}, {{7, 8, 9}}}};
  const auto aligned = align_teacher(examples, records, schema);
  ProjectionConfig pc;
  pc.feature_dim = 32;
  const FeatureCache cache(examples, pc);
  const std::size_t idx[] = {1, 0};
  const auto batch = make_batch(examples, idx, cache, schema, aligned);
  CHECK(batch.batch() == 2);
  CHECK(batch.steps() == 2);
  CHECK(batch.features.lengths == std::vector<int>{1, 2});
  CHECK(batch.intents == std::vector<int>{-1, 0});
  CHECK(batch.slots == std::vector<int>{-1, -1, 0, 1});
  CHECK(batch.mask() == std::vector<double>{1, 0, 1, 1});
  CHECK(batch.has_teacher);
  CHECK(batch.teacher_intent == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(batch.teacher_slots ==
        std::vector<double>{7, 8, 9, 0, 0, 0, 1, 2, 3, 4, 5, 6});
  const auto plain = make_batch(examples, idx, cache, schema);
  CHECK(!plain.has_teacher);
  CHECK_THROWS_AS(make_batch(examples, std::span<const std::size_t>{}, cache, schema),
                  InputError);
}
