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

#include "mwvqa/checkpoint.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "mwvqa/errors.hpp"
#include "mwvqa/serialize.hpp"

namespace mwvqa {
namespace {

constexpr std::array<char, 4> kMagic = {'M', 'W', 'C', 'K'};

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) out += s + "\n";
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("answer list lacks a final newline");
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  for (const std::string& a : ckpt.answers) {
    if (a.empty() || a.find('\n') != std::string::npos) {
      throw ContractError("write_checkpoint: answers must be non-empty single lines");
    }
  }
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, ckpt.version);
  write_string(out, ckpt.config_text);
  write_string(out, ckpt.rng_state);
  write_string(out, ckpt.vocab_text);
  write_string(out, join_lines(ckpt.answers));
  write_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    write_string(out, name);
    write_tensor(out, tensor);
  }
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size())) {
    throw CheckpointTruncatedError(source + ": truncated before the checkpoint header");
  }
  if (magic != kMagic) throw FormatError(source + ": not a checkpoint (bad magic)");

  try {
    Checkpoint ckpt;
    ckpt.version = read_u32(in);
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointVersionError(source + ": checkpoint format version " +
                                   std::to_string(ckpt.version) + ", this build reads version " +
                                   std::to_string(kCheckpointVersion));
    }
    ckpt.config_text = read_string(in);
    ckpt.rng_state = read_string(in);
    ckpt.vocab_text = read_string(in);
    ckpt.answers = split_lines(read_string(in));
    const std::uint32_t count = read_u32(in);
    std::set<std::string> names;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = read_string(in);
      if (!names.insert(name).second) throw FormatError("duplicate tensor '" + name + "'");
      Tensor t = read_tensor(in);
      ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      throw FormatError("trailing bytes after the tensor table");
    }
    return ckpt;
  } catch (const CheckpointVersionError&) {
    throw;
  } catch (const CheckpointTruncatedError& e) {
    throw CheckpointTruncatedError(source + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(out, checkpoint);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace mwvqa
