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

#include "pqrnn/projection.h"

#include <algorithm>
#include <cmath>

#include "pqrnn/errors.h"

namespace pqrnn {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Table of the four bit-pair values (00, 01, 10, 11) for each mode.
constexpr std::int8_t kBalanced[4] = {-1, 0, 0, 1};
constexpr std::int8_t kUnbalanced[4] = {-1, 1, 1, 0};

std::uint64_t segment_seed(std::uint64_t seed, int segment) {
  return splitmix64_mix(seed + kGolden * static_cast<std::uint64_t>(segment + 1));
}

}  // namespace

const char* map_mode_name(MapMode mode) {
  return mode == MapMode::kBalanced ? "balanced" : "unbalanced";
}

MapMode parse_map_mode(std::string_view name) {
  if (name == "balanced") return MapMode::kBalanced;
  if (name == "unbalanced") return MapMode::kUnbalanced;
  throw ConfigError("map_mode must be \"balanced\" or \"unbalanced\", got \"" +
                    std::string(name) + "\"");
}

void ProjectionConfig::validate() const {
  if (feature_dim <= 0 || feature_dim % 2 != 0) {
    throw ConfigError("projection feature_dim must be even and > 0, got " +
                      std::to_string(feature_dim));
  }
  if (prefix_len < 1 || suffix_len < 1) {
    throw ConfigError("projection prefix_len and suffix_len must be >= 1");
  }
  double total = 0;
  for (double share : feature_split) {
    if (share < 0) throw ConfigError("projection feature_split has a negative share");
    total += share;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("projection feature_split must sum to 1");
  }
  const auto widths = segment_widths();
  if (widths[0] < 1) {
    throw ConfigError("projection whole-token segment is empty");
  }
}

std::array<int, 3> ProjectionConfig::segment_widths() const {
  const int prefix = static_cast<int>(std::floor(feature_split[1] * feature_dim));
  const int suffix = static_cast<int>(std::floor(feature_split[2] * feature_dim));
  return {feature_dim - prefix - suffix, prefix, suffix};
}

BitSequence::BitSequence(std::size_t num_bits)
    : num_bits_(num_bits), words_((num_bits + 63) / 64, 0) {}

BitSequence BitSequence::from_string(std::string_view bits) {
  std::size_t n = 0;
  for (char c : bits) {
    if (c == '0' || c == '1') {
      ++n;
    } else if (c != ' ') {
      throw InputError("bit string may only contain 0, 1 and spaces");
    }
  }
  BitSequence out(n);
  std::size_t i = 0;
  for (char c : bits) {
    if (c == '0' || c == '1') out.set(i++, c == '1');
  }
  return out;
}

void BitSequence::set(std::size_t i, bool value) {
  const std::uint64_t m = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= m;
  } else {
    words_[i / 64] &= ~m;
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

BitSequence fingerprint(std::string_view token, std::uint64_t seed,
                        std::size_t num_bits) {
  BitSequence bits(num_bits);
  std::uint64_t state = seed ^ fnv1a64(token);
  const std::size_t blocks = (num_bits + 63) / 64;
  std::vector<std::uint64_t> words(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    state += kGolden;
    words[b] = splitmix64_mix(state);
  }
  for (std::size_t i = 0; i < num_bits; ++i) {
    bits.set(i, (words[i / 64] >> (i % 64)) & 1u);
  }
  return bits;
}

TernaryVector ternary_map(const BitSequence& bits, MapMode mode) {
  if (bits.size() % 2 != 0) {
    throw InputError("ternary_map needs an even number of bits, got " +
                     std::to_string(bits.size()));
  }
  const std::int8_t* table = mode == MapMode::kBalanced ? kBalanced : kUnbalanced;
  TernaryVector out(bits.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int pair = (bits.bit(2 * i) ? 2 : 0) + (bits.bit(2 * i + 1) ? 1 : 0);
    out[i] = table[pair];
  }
  return out;
}

std::string_view utf8_prefix(std::string_view token, int count) {
  std::size_t pos = 0;
  int seen = 0;
  while (pos < token.size()) {
    if (!is_continuation(static_cast<unsigned char>(token[pos]))) {
      if (seen == count) return token.substr(0, pos);
      ++seen;
    }
    ++pos;
  }
  return token;
}

std::string_view utf8_suffix(std::string_view token, int count) {
  std::size_t pos = token.size();
  int seen = 0;
  while (pos > 0) {
    --pos;
    if (!is_continuation(static_cast<unsigned char>(token[pos]))) {
      if (++seen == count) return token.substr(pos);
    }
  }
  return token;
}

TernaryVector project_token(std::string_view token,
                            const ProjectionConfig& config) {
  const auto widths = config.segment_widths();
  const std::string_view parts[3] = {token, utf8_prefix(token, config.prefix_len),
                                     utf8_suffix(token, config.suffix_len)};
  TernaryVector out;
  out.reserve(config.feature_dim);
  for (int s = 0; s < 3; ++s) {
    if (widths[s] == 0) continue;
    const BitSequence bits =
        fingerprint(parts[s], segment_seed(config.seed, s), 2 * widths[s]);
    const TernaryVector segment = ternary_map(bits, config.map_mode);
    out.insert(out.end(), segment.begin(), segment.end());
  }
  return out;
}

ProjectedSequence project_sequence(const std::vector<std::string>& tokens,
                                   const ProjectionConfig& config) {
  if (tokens.empty()) throw InputError("project_sequence: empty token list");
  ProjectedSequence seq;
  seq.rows = static_cast<int>(tokens.size());
  seq.cols = config.feature_dim;
  seq.values.reserve(static_cast<std::size_t>(seq.rows) * seq.cols);
  for (const auto& token : tokens) {
    const TernaryVector row = project_token(token, config);
    seq.values.insert(seq.values.end(), row.begin(), row.end());
  }
  seq.mask.assign(seq.rows, true);
  return seq;
}

PaddedFeatures pad_sequences(
    std::span<const ProjectedSequence* const> sequences) {
  if (sequences.empty()) throw InputError("pad_sequences: empty batch");
  PaddedFeatures out;
  out.batch = static_cast<int>(sequences.size());
  out.dim = sequences.front()->cols;
  for (const ProjectedSequence* seq : sequences) {
    if (seq->cols != out.dim) {
      throw InputError("pad_sequences: feature widths differ within a batch");
    }
    out.steps = std::max(out.steps, seq->rows);
    out.lengths.push_back(seq->rows);
  }
  const std::size_t stride = static_cast<std::size_t>(out.steps) * out.dim;
  out.values.assign(stride * out.batch, 0);
  for (int b = 0; b < out.batch; ++b) {
    const auto& v = sequences[b]->values;
    std::copy(v.begin(), v.end(), out.values.begin() + b * stride);
  }
  return out;
}

}  // namespace pqrnn
