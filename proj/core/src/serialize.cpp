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

#include "mwvqa/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <limits>

#include "mwvqa/errors.hpp"

namespace mwvqa {

namespace {

constexpr std::array<char, 4> kTensorMagic = {'M', 'W', 'T', '1'};
constexpr std::size_t kMaxRecordElements = std::size_t{1} << 28;
constexpr std::uint32_t kMaxStringBytes = 1u << 28;

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw CheckpointTruncatedError(std::string("truncated input while reading ") + what);
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), 8);
}

std::uint64_t read_u64(std::istream& in) {
  std::array<char, 8> bytes;
  read_exact(in, bytes.data(), 8, "tensor values");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::array<char, 4> bytes;
  read_exact(in, bytes.data(), 4, "u32 field");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ContractError("write_string: string too long");
  }
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > kMaxStringBytes) {
    throw FormatError("string field of " + std::to_string(n) + " bytes is implausibly large");
  }
  std::string s(n, '\0');
  if (n) read_exact(in, s.data(), n, "string payload");
  return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kTensorMagic.data(), kTensorMagic.size());
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) write_u64(out, std::bit_cast<std::uint64_t>(v));
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  read_exact(in, magic.data(), magic.size(), "tensor magic");
  if (magic != kTensorMagic) {
    throw FormatError("bad tensor magic, expected MWT1");
  }
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = read_u32(in);
    if (d == 0) throw FormatError("tensor record has a zero dimension");
  }
  std::size_t numel = 1;
  for (std::size_t d : shape) {
    numel *= d;
    if (numel > kMaxRecordElements) {
      throw FormatError("tensor record of shape " + shape_string(shape) + " is implausibly large");
    }
  }
  std::vector<double> values(numel);
  for (double& v : values) v = std::bit_cast<double>(read_u64(in));
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace mwvqa
