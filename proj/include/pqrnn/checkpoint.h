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

// Model checkpoint container.
//
//   "pqrnn-ckpt-v1\n"
//   uint64 little-endian header length
//   JSON header: model config, label schema, tensor table (name, shape,
//     offset in floats), batch-norm running statistics, quantization
//     ranges, payload size and FNV-1a checksum of the payload bytes
//   float32 little-endian payload, tensors row-major in table order

#ifndef PQRNN_CHECKPOINT_H_
#define PQRNN_CHECKPOINT_H_

#include <string>
#include <string_view>

#include "pqrnn/data.h"
#include "pqrnn/model.h"

namespace pqrnn {

inline constexpr std::string_view kCheckpointMagic = "pqrnn-ckpt-v1\n";

struct Checkpoint {
  PqrnnModel<float> model;
  LabelSchema schema;
};

std::string serialize_checkpoint(const PqrnnModel<float>& model,
                                 const LabelSchema& schema);
// Throws CheckpointError on any malformed, truncated or corrupt input.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const PqrnnModel<float>& model,
                     const LabelSchema& schema);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pqrnn

#endif  // PQRNN_CHECKPOINT_H_
