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

#include "pqrnn/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pqrnn/errors.h"
#include "pqrnn/run_config.h"

namespace pqrnn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  }
  return v;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_checkpoint(const PqrnnModel<float>& model,
                                 const LabelSchema& schema) {
  std::string payload;
  payload.reserve(model.params().num_scalars() * 4);
  ordered_json tensors = ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.params().all()) {
    tensors.push_back({{"name", p.name},
                       {"shape", p.value->shape()},
                       {"offset", offset},
                       {"l2", p.l2}});
    for (float v : p.value->data()) put_f32(payload, v);
    offset += p.value->size();
  }
  ordered_json bn = ordered_json::object();
  for (const auto& [name, s] : model.stats().batch_norm) {
    bn[name] = {{"mean", s.running_mean},
                {"var", s.running_var},
                {"momentum", s.momentum},
                {"epsilon", s.epsilon}};
  }
  ordered_json quant = ordered_json::object();
  for (const auto& [name, r] : model.stats().quant) {
    quant[name] = {{"min", r.min}, {"max", r.max},
                   {"initialized", r.initialized}, {"bits", r.bits}};
  }
  ordered_json header;
  header["format"] = "pqrnn-ckpt-v1";
  header["model"] = to_json(model.config());
  header["schema"] = {{"intents", schema.intents()},
                      {"slot_types", schema.slot_types()}};
  header["tensors"] = std::move(tensors);
  header["batch_norm"] = std::move(bn);
  header["quant"] = std::move(quant);
  header["payload_floats"] = offset;
  header["checksum"] = hex64(fnv1a64(payload));
  const std::string text = header.dump();
  std::string out(kCheckpointMagic);
  put_u64(out, text.size());
  out += text;
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("not a pqrnn-ckpt-v1 checkpoint");
  }
  bytes.remove_prefix(kCheckpointMagic.size());
  if (bytes.size() < 8) throw CheckpointError("checkpoint truncated in header");
  const std::uint64_t header_len = get_u64(bytes);
  bytes.remove_prefix(8);
  if (header_len > bytes.size()) throw CheckpointError("checkpoint truncated in header");
  json header;
  try {
    header = json::parse(bytes.substr(0, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::string_view payload = bytes.substr(header_len);
  try {
    if (header.at("format").get<std::string>() != "pqrnn-ckpt-v1") {
      throw CheckpointError("unsupported checkpoint format");
    }
    const auto floats = header.at("payload_floats").get<std::uint64_t>();
    if (payload.size() != floats * 4) {
      throw CheckpointError("checkpoint payload holds " + std::to_string(payload.size()) +
                            " bytes, header expects " + std::to_string(floats * 4));
    }
    if (header.at("checksum").get<std::string>() != hex64(fnv1a64(payload))) {
      throw CheckpointError("checkpoint checksum mismatch");
    }
    ModelConfig config = model_config_from_json(header.at("model"));
    const auto& sj = header.at("schema");
    LabelSchema schema(sj.at("intents").get<std::vector<std::string>>(),
                       sj.at("slot_types").get<std::vector<std::string>>());
    if (schema.num_intents() != config.num_intents ||
        schema.num_args() != config.num_args) {
      throw CheckpointError("checkpoint schema does not match its model config");
    }
    ParameterSet<float> params;
    for (const auto& t : header.at("tensors")) {
      const auto shape = t.at("shape").get<Shape>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      auto v = params.add(t.at("name").get<std::string>(), shape, t.at("l2").get<bool>());
      if (offset + v->size() > floats) {
        throw CheckpointError("tensor " + t.at("name").get<std::string>() +
                              " runs past the payload");
      }
      const char* src = payload.data() + offset * 4;
      for (Index i = 0; i < v->size(); ++i) (*v)[i] = get_f32(src + 4 * i);
    }
    EncoderStats stats;
    for (const auto& [name, s] : header.at("batch_norm").items()) {
      BatchNormState state;
      state.running_mean = s.at("mean").get<std::vector<double>>();
      state.running_var = s.at("var").get<std::vector<double>>();
      state.momentum = s.at("momentum").get<double>();
      state.epsilon = s.at("epsilon").get<double>();
      if (state.running_mean.size() != state.running_var.size()) {
        throw CheckpointError("batch norm state " + name + " is inconsistent");
      }
      stats.batch_norm[name] = std::move(state);
    }
    for (const auto& [name, r] : header.at("quant").items()) {
      QuantRange range;
      range.min = r.at("min").get<double>();
      range.max = r.at("max").get<double>();
      range.initialized = r.at("initialized").get<bool>();
      range.bits = r.at("bits").get<int>();
      stats.quant[name] = range;
    }
    return Checkpoint{PqrnnModel<float>(std::move(config), std::move(params),
                                        std::move(stats)),
                      std::move(schema)};
  } catch (const CheckpointError&) {
    throw;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const PqrnnModel<float>& model,
                     const LabelSchema& schema) {
  const std::string bytes = serialize_checkpoint(model, schema);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return deserialize_checkpoint(buffer.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

}  // namespace pqrnn
