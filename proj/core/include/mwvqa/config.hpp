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

#ifndef MWVQA_CONFIG_HPP_
#define MWVQA_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mwvqa/multiway.hpp"
#include "mwvqa/vision_tokenizer.hpp"

namespace mwvqa {

// Everything a run needs. Serialized as flat key=value text; the same text
// is stored in checkpoints.
struct RunConfig {
  // optimization
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double dropout = 0.4;
  double weight_decay = 0.01;
  double learning_rate = 3e-5;
  std::uint64_t seed = 0;
  bool freeze_encoder = false;

  // images
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t channels = 3;

  // multiway encoder
  std::size_t layers = 4;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  std::optional<std::size_t> fusion_top;  // unset: min(3, layers)
  std::size_t max_text_len = 32;
  std::size_t text_vocab_size = 8000;  // cap used by build-vocab

  // visual tokenizer
  std::size_t visual_vocab = 64;
  std::size_t code_dim = 32;
  std::size_t teacher_dim = 32;
  std::size_t tokenizer_dim = 32;
  std::size_t tokenizer_layers = 1;
  std::size_t tokenizer_heads = 4;
  std::size_t decoder_layers = 1;
  std::size_t decoder_heads = 4;

  // masking
  double text_mask_ratio = 0.15;
  double paired_text_mask_ratio = 0.5;
  double patch_mask_ratio = 0.4;
  std::optional<std::size_t> min_block;  // unset: default_min_block

  // paths
  std::string dataset;
  std::string test_dataset;
  std::string taxonomy;
  std::string vocab;
  std::string checkpoint;

  std::size_t effective_fusion_top() const;
  std::size_t effective_min_block() const;
};

// Every recognised key, in the order to_text writes them.
const std::vector<std::string>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
// "key=value"
void apply_override(RunConfig& config, std::string_view assignment);
std::string get_config_value(const RunConfig& config, std::string_view key);

// Blank lines and lines starting with '#' are ignored. Errors carry the
// source name and line number.
RunConfig parse_config(std::string_view text, const std::string& source = "<memory>");
RunConfig load_config(const std::filesystem::path& path);
std::string to_text(const RunConfig& config);

// Cross-field checks; throws ConfigError naming the offending key.
void validate(const RunConfig& config);

// Keys that fix parameter shapes.
bool same_architecture(const RunConfig& a, const RunConfig& b);
// Copies the shape-determining keys of `source` into `target`.
void adopt_architecture(RunConfig& target, const RunConfig& source);

multiway::MultiwayConfig model_config(const RunConfig& config, std::size_t text_vocab,
                                      std::size_t answers);
vision::VqkdConfig tokenizer_config(const RunConfig& config);

}  // namespace mwvqa

#endif  // MWVQA_CONFIG_HPP_
