// Copyright 2026 The mwvqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MWVQA_CHECKPOINT_HPP_
#define MWVQA_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mwvqa/layers.hpp"

namespace mwvqa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// File layout, all integers little-endian:
//   "MWCK", u32 version, config text, RNG state, vocabulary text, answer list
//   (one per line), u32 tensor count, then (name, MWT1 tensor record) pairs.
// Strings are u32 length + bytes.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::string rng_state;
  std::string vocab_text;
  std::vector<std::string> answers;
  NamedTensors tensors;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
// Throws CheckpointVersionError, CheckpointTruncatedError or FormatError.
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mwvqa

#endif  // MWVQA_CHECKPOINT_HPP_
