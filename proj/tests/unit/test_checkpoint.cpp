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

#include <bit>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mwvqa/checkpoint.hpp"
#include "mwvqa/errors.hpp"
#include "mwvqa/rng.hpp"

namespace mwvqa {
namespace {

namespace fs = std::filesystem;

Checkpoint sample_checkpoint() {
  Rng rng(4);
  Checkpoint c;
  c.config_text = "epochs=3\n";
  c.rng_state = "12 34 56";
  c.vocab_text = "màu\nđỏ\n";
  c.answers = {"hai", "đỏ"};
  c.tensors.emplace_back("a.weight", Tensor::normal({3, 4}, 1.0, rng));
  c.tensors.emplace_back("a.bias", Tensor::normal({4}, 1.0, rng));
  c.tensors.emplace_back("scalar", Tensor::scalar(-0.0));
  return c;
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, c);
  return out.str();
}

Checkpoint from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_checkpoint(in);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = sample_checkpoint();
  const Checkpoint back = from_bytes(bytes_of(c));
  EXPECT_EQ(back.version, kCheckpointVersion);
  EXPECT_EQ(back.config_text, c.config_text);
  EXPECT_EQ(back.rng_state, c.rng_state);
  EXPECT_EQ(back.vocab_text, c.vocab_text);
  EXPECT_EQ(back.answers, c.answers);
  ASSERT_EQ(back.tensors.size(), c.tensors.size());
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].first, c.tensors[i].first);
    const Tensor& a = c.tensors[i].second;
    const Tensor& b = back.tensors[i].second;
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t k = 0; k < a.numel(); ++k) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a.data()[k]), std::bit_cast<std::uint64_t>(b.data()[k]));
    }
  }
  EXPECT_NE(back.find("a.bias"), nullptr);
  EXPECT_EQ(back.find("missing"), nullptr);
}

TEST(Checkpoint, SaveLoadSaveIsByteEqual) {
  const fs::path dir = fs::path(MWVQA_TEST_TMP) / "ckpt";
  fs::create_directories(dir);
  save_checkpoint(sample_checkpoint(), dir / "a.ckpt");
  save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
  std::ifstream a(dir / "a.ckpt", std::ios::binary), b(dir / "b.ckpt", std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_FALSE(sa.str().empty());
}

TEST(Checkpoint, EveryTruncationIsDetected) {
  const std::string bytes = bytes_of(sample_checkpoint());
  for (std::size_t len = 4; len < bytes.size(); ++len) {
    EXPECT_THROW(from_bytes(bytes.substr(0, len)), CheckpointTruncatedError) << "length " << len;
  }
}

TEST(Checkpoint, TrailingBytesAreFormatError) {
  EXPECT_THROW(from_bytes(bytes_of(sample_checkpoint()) + "x"), FormatError);
}

TEST(Checkpoint, BadMagicIsFormatError) {
  std::string bytes = bytes_of(sample_checkpoint());
  bytes[0] = 'X';
  EXPECT_THROW(from_bytes(bytes), FormatError);
}

TEST(Checkpoint, VersionMismatchNamesBothVersions) {
  std::string bytes = bytes_of(sample_checkpoint());
  bytes[4] = static_cast<char>(kCheckpointVersion + 1);  // little-endian u32 after magic
  try {
    from_bytes(bytes);
    FAIL() << "expected CheckpointVersionError";
  } catch (const CheckpointVersionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(kCheckpointVersion + 1)), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(kCheckpointVersion)), std::string::npos) << msg;
  }
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

}  // namespace
}  // namespace mwvqa
