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

// Embedding-free token featurization.
//
// A token is hashed into a 2N-bit fingerprint and every bit pair is mapped
// onto {-1, 0, +1}. The N features are split into three independently seeded
// segments covering the whole token, its prefix and its suffix, so tokens
// sharing a prefix or suffix share that segment exactly.
//
// Fingerprints are pinned to 64-bit FNV-1a over the token bytes mixed with
// the seed, expanded by splitmix64 blocks. Output is bit-identical on every
// platform.

#ifndef PQRNN_PROJECTION_H_
#define PQRNN_PROJECTION_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pqrnn {

enum class MapMode {
  kBalanced,    // 00->-1, 01->0, 10->0, 11->+1
  kUnbalanced,  // 00->-1, 01->+1, 10->+1, 11->0
};

const char* map_mode_name(MapMode mode);
MapMode parse_map_mode(std::string_view name);

inline constexpr std::uint64_t kDefaultProjectionSeed = 0x9E3779B97F4A7C15ULL;

struct ProjectionConfig {
  int feature_dim = 1024;  // N
  MapMode map_mode = MapMode::kBalanced;
  int prefix_len = 3;
  int suffix_len = 3;
  // Shares of N for the whole-token, prefix and suffix segments.
  std::array<double, 3> feature_split = {0.5, 0.25, 0.25};
  std::uint64_t seed = kDefaultProjectionSeed;

  // Throws ConfigError.
  void validate() const;

  // Segment widths. Prefix and suffix shares are floored; the whole-token
  // segment takes the remainder so the widths always sum to N.
  std::array<int, 3> segment_widths() const;

  bool operator==(const ProjectionConfig&) const = default;
};

// Fixed-length bit string, bit i stored at words[i / 64] bit (i % 64).
class BitSequence {
 public:
  BitSequence() = default;
  explicit BitSequence(std::size_t num_bits);
  // Parses '0'/'1' characters, ignoring spaces. Mostly for tests.
  static BitSequence from_string(std::string_view bits);

  std::size_t size() const { return num_bits_; }
  bool bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
  void set(std::size_t i, bool value);
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool operator==(const BitSequence&) const = default;

 private:
  std::size_t num_bits_ = 0;
  std::vector<std::uint64_t> words_;
};

using TernaryVector = std::vector<std::int8_t>;

struct ProjectedSequence {
  int rows = 0;  // T
  int cols = 0;  // N
  std::vector<std::int8_t> values;  // row-major T x N
  std::vector<bool> mask;           // all true; padding happens at batching

  const std::int8_t* row(int t) const { return values.data() + t * cols; }
};

// Sequences right-padded with zero rows to the longest member.
struct PaddedFeatures {
  int batch = 0;
  int steps = 0;
  int dim = 0;
  std::vector<int> lengths;
  std::vector<std::int8_t> values;  // batch x steps x dim
};

// Throws InputError when `sequences` is empty or widths differ.
PaddedFeatures pad_sequences(std::span<const ProjectedSequence* const> sequences);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64_mix(std::uint64_t z);

BitSequence fingerprint(std::string_view token, std::uint64_t seed,
                        std::size_t num_bits);

// Throws InputError on an odd bit count.
TernaryVector ternary_map(const BitSequence& bits, MapMode mode);

TernaryVector project_token(std::string_view token,
                            const ProjectionConfig& config);

// Throws InputError on an empty token list.
ProjectedSequence project_sequence(const std::vector<std::string>& tokens,
                                   const ProjectionConfig& config);

// First / last `count` UTF-8 code points of `token` (whole token if shorter).
std::string_view utf8_prefix(std::string_view token, int count);
std::string_view utf8_suffix(std::string_view token, int count);

}  // namespace pqrnn

#endif  // PQRNN_PROJECTION_H_
