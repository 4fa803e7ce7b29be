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

#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "pqrnn/errors.h"
#include "pqrnn/projection.h"

using namespace pqrnn;

namespace {

std::string random_token(std::mt19937_64& rng) {
  static const char kLetters[] = "abcdefghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<int> len(1, 12), ch(0, 25);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += kLetters[ch(rng)];
  return s;
}

ProjectionConfig small_config(int n) {
  ProjectionConfig c;
  c.feature_dim = n;
  return c;
}

}  // namespace

TEST_CASE("fnv1a and splitmix reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("flight") == 0x4d15cccd2bc1bf83ULL);
  // First output of a splitmix64 generator seeded with zero.
  CHECK(splitmix64_mix(0x9E3779B97F4A7C15ULL) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("fingerprint is pinned") {
  const BitSequence bits = fingerprint("flight", kDefaultProjectionSeed, 128);
  REQUIRE(bits.words().size() == 2);
  CHECK(bits.words()[0] == 0x605c121e3a9fbd1eULL);
  CHECK(bits.words()[1] == 0xd09c5f2e6364e700ULL);
  CHECK(fingerprint("flight", kDefaultProjectionSeed, 2048) ==
        fingerprint("flight", kDefaultProjectionSeed, 2048));
  const BitSequence empty = fingerprint("", kDefaultProjectionSeed, 64);
  CHECK(empty == fingerprint("", kDefaultProjectionSeed, 64));
}

TEST_CASE("fingerprint avalanche between close tokens") {
  const auto a = fingerprint("flight", kDefaultProjectionSeed, 2048);
  const auto b = fingerprint("flights", kDefaultProjectionSeed, 2048);
  int differing = 0;
  for (std::size_t w = 0; w < a.words().size(); ++w) {
    differing += std::popcount(a.words()[w] ^ b.words()[w]);
  }
  CHECK(differing >= 0.45 * 2048);
}

TEST_CASE("ternary map tables") {
  const auto bits = BitSequence::from_string("00 01 10 11");
  CHECK(ternary_map(bits, MapMode::kBalanced) == TernaryVector{-1, 0, 0, 1});
  CHECK(ternary_map(bits, MapMode::kUnbalanced) == TernaryVector{-1, 1, 1, 0});
  const auto zeros = BitSequence::from_string("000000");
  CHECK(ternary_map(zeros, MapMode::kBalanced) == TernaryVector{-1, -1, -1});
  CHECK_THROWS_AS(ternary_map(BitSequence::from_string("010"), MapMode::kBalanced),
                  InputError);
}

TEST_CASE("project_token is pinned") {
  CHECK(project_token("flight", small_config(16)) ==
        TernaryVector{0, 1, -1, 0, -1, 1, 0, -1, 0, -1, 0, -1, 0, 0, 0, 1});
  CHECK(project_token("h\xc3\xa9llo", small_config(16)) ==
        TernaryVector{1, 1, 0, -1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, -1, -1});
  ProjectionConfig unbalanced = small_config(16);
  unbalanced.map_mode = MapMode::kUnbalanced;
  CHECK(project_token("flight", unbalanced) ==
        TernaryVector{1, 0, -1, 1, -1, 0, 1, -1, 1, -1, 1, -1, 1, 1, 1, 0});
}

TEST_CASE("segment widths and validation") {
  ProjectionConfig c;
  CHECK(c.segment_widths() == std::array<int, 3>{512, 256, 256});
  c.feature_dim = 10;
  CHECK(c.segment_widths() == std::array<int, 3>{6, 2, 2});
  c.feature_dim = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.feature_dim = 16;
  c.feature_split = {0.5, 0.3, 0.3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_map_mode("skewed"), ConfigError);
}

TEST_CASE("shared prefix gives identical prefix segment") {
  ProjectionConfig c = small_config(64);
  c.prefix_len = 2;
  const auto a = project_token("unhappy", c);
  const auto b = project_token("unhelpful", c);
  const auto w = c.segment_widths();
  for (int i = w[0]; i < w[0] + w[1]; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("short tokens use the whole token for every segment") {
  CHECK(utf8_prefix("a", 3) == "a");
  CHECK(utf8_suffix("a", 3) == "a");
  CHECK(utf8_prefix("h\xc3\xa9llo", 2) == "h\xc3\xa9");
  CHECK(utf8_suffix("ab\xc3\xa9", 1) == "\xc3\xa9");
  const auto v = project_token("a", small_config(32));
  CHECK(v.size() == 32);
}

TEST_CASE("project_sequence shape and determinism") {
  const ProjectionConfig c = small_config(32);
  const auto seq = project_sequence({"book", "a", "flight", "book"}, c);
  CHECK(seq.rows == 4);
  CHECK(seq.cols == 32);
  CHECK(seq.values.size() == 128u);
  CHECK(std::equal(seq.row(0), seq.row(0) + 32, seq.row(3)));
  CHECK(seq.mask == std::vector<bool>(4, true));
  CHECK_THROWS_AS(project_sequence({}, c), InputError);
}

TEST_CASE("pad_sequences right-pads with zero rows") {
  const ProjectionConfig c = small_config(8);
  const auto a = project_sequence({"x", "y", "z"}, c);
  const auto b = project_sequence({"w"}, c);
  const ProjectedSequence* rows[] = {&a, &b};
  const auto p = pad_sequences(rows);
  CHECK(p.steps == 3);
  CHECK(p.lengths == std::vector<int>{3, 1});
  for (int i = 8; i < 24; ++i) CHECK(p.values[24 + i] == 0);
}

TEST_CASE("balanced map statistics") {
  const ProjectionConfig c = small_config(1024);
  std::mt19937_64 rng(7);
  long counts[3] = {0, 0, 0};
  double norm_sum = 0;
  const int tokens = 1000;
  for (int i = 0; i < tokens; ++i) {
    const auto v = project_token(random_token(rng) + std::to_string(i), c);
    long sq = 0;
    for (auto x : v) {
      ++counts[x + 1];
      sq += x * x;
    }
    norm_sum += static_cast<double>(sq);
  }
  const double total = static_cast<double>(tokens) * 1024;
  CHECK(std::abs(counts[1] / total - 0.5) < 0.01);
  CHECK(std::abs(counts[2] / total - counts[0] / total) < 0.01);
  CHECK(std::abs(norm_sum / tokens - 512.0) < 0.05 * 512.0);
}

TEST_CASE("unbalanced map statistics") {
  ProjectionConfig c = small_config(1024);
  c.map_mode = MapMode::kUnbalanced;
  std::mt19937_64 rng(8);
  long counts[3] = {0, 0, 0};
  const int tokens = 1000;
  for (int i = 0; i < tokens; ++i) {
    for (auto x : project_token(random_token(rng) + std::to_string(i), c)) ++counts[x + 1];
  }
  const double total = static_cast<double>(tokens) * 1024;
  CHECK(std::abs(counts[2] / total - 0.5) < 0.01);
  CHECK(std::abs(counts[0] / total - 0.25) < 0.01);
  CHECK(std::abs(counts[1] / total - 0.25) < 0.01);
}
