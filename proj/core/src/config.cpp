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

#include "mwvqa/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "mwvqa/errors.hpp"
#include "mwvqa/masking.hpp"

namespace mwvqa {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + std::string(key) +
                      "' expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + std::string(key) +
                      "' expects an unsigned 64-bit integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("config key '" + std::string(key) + "' expects a finite number, got '" +
                      std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "' expects true or false, got '" +
                    std::string(v) + "'");
}

std::optional<std::size_t> parse_auto_size(std::string_view key, std::string_view v) {
  if (v == "auto") return std::nullopt;
  return parse_size(key, v);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_auto(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "auto";
}

struct KeyDef {
  std::string name;
  bool architecture;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MWVQA_SIZE_KEY(field, arch)                                                  \
  KeyDef{#field, arch,                                                               \
         [](RunConfig& c, std::string_view v) { c.field = parse_size(#field, v); }, \
         [](const RunConfig& c) { return std::to_string(c.field); }}
#define MWVQA_DOUBLE_KEY(field)                                                        \
  KeyDef{#field, false,                                                                \
         [](RunConfig& c, std::string_view v) { c.field = parse_double(#field, v); }, \
         [](const RunConfig& c) { return format_double(c.field); }}
#define MWVQA_AUTO_KEY(field, arch)                                                       \
  KeyDef{#field, arch,                                                                    \
         [](RunConfig& c, std::string_view v) { c.field = parse_auto_size(#field, v); }, \
         [](const RunConfig& c) { return format_auto(c.field); }}
#define MWVQA_PATH_KEY(field)                                                   \
  KeyDef{#field, false,                                                         \
         [](RunConfig& c, std::string_view v) { c.field = std::string(v); },    \
         [](const RunConfig& c) { return c.field; }}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      MWVQA_SIZE_KEY(epochs, false),
      MWVQA_SIZE_KEY(batch_size, false),
      MWVQA_DOUBLE_KEY(dropout),
      MWVQA_DOUBLE_KEY(weight_decay),
      MWVQA_DOUBLE_KEY(learning_rate),
      KeyDef{"seed", false,
             [](RunConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
             [](const RunConfig& c) { return std::to_string(c.seed); }},
      KeyDef{"freeze_encoder", false,
             [](RunConfig& c, std::string_view v) {
               c.freeze_encoder = parse_bool("freeze_encoder", v);
             },
             [](const RunConfig& c) { return std::string(c.freeze_encoder ? "true" : "false"); }},
      MWVQA_SIZE_KEY(image_size, true),
      MWVQA_SIZE_KEY(patch_size, true),
      MWVQA_SIZE_KEY(channels, true),
      MWVQA_SIZE_KEY(layers, true),
      MWVQA_SIZE_KEY(d_model, true),
      MWVQA_SIZE_KEY(heads, true),
      MWVQA_SIZE_KEY(d_ff, true),
      MWVQA_AUTO_KEY(fusion_top, true),
      MWVQA_SIZE_KEY(max_text_len, true),
      MWVQA_SIZE_KEY(text_vocab_size, false),
      MWVQA_SIZE_KEY(visual_vocab, true),
      MWVQA_SIZE_KEY(code_dim, true),
      MWVQA_SIZE_KEY(teacher_dim, true),
      MWVQA_SIZE_KEY(tokenizer_dim, true),
      MWVQA_SIZE_KEY(tokenizer_layers, true),
      MWVQA_SIZE_KEY(tokenizer_heads, true),
      MWVQA_SIZE_KEY(decoder_layers, true),
      MWVQA_SIZE_KEY(decoder_heads, true),
      MWVQA_DOUBLE_KEY(text_mask_ratio),
      MWVQA_DOUBLE_KEY(paired_text_mask_ratio),
      MWVQA_DOUBLE_KEY(patch_mask_ratio),
      MWVQA_AUTO_KEY(min_block, false),
      MWVQA_PATH_KEY(dataset),
      MWVQA_PATH_KEY(test_dataset),
      MWVQA_PATH_KEY(taxonomy),
      MWVQA_PATH_KEY(vocab),
      MWVQA_PATH_KEY(checkpoint),
  };
  return table;
}

#undef MWVQA_SIZE_KEY
#undef MWVQA_DOUBLE_KEY
#undef MWVQA_AUTO_KEY
#undef MWVQA_PATH_KEY

const KeyDef& find_key(std::string_view key) {
  for (const KeyDef& def : key_table()) {
    if (def.name == key) return def;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void require_positive(std::size_t v, const char* key) {
  if (v == 0) throw ConfigError(std::string("config key '") + key + "' must be positive");
}

void require_fraction(double v, const char* key) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ConfigError(std::string("config key '") + key + "' must lie in (0, 1), got " +
                      format_double(v));
  }
}

}  // namespace

std::size_t RunConfig::effective_fusion_top() const {
  return fusion_top ? *fusion_top : multiway::default_fusion_top(layers);
}

std::size_t RunConfig::effective_min_block() const {
  const std::size_t grid = patch_size == 0 ? 0 : image_size / patch_size;
  return min_block ? *min_block : masking::default_min_block(grid, grid, patch_mask_ratio);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const KeyDef& def : key_table()) out.push_back(def.name);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set_config_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig config;
  std::vector<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      throw ConfigError(where + "expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ConfigError(where + "duplicate key '" + key + "'");
    }
    seen.push_back(key);
    try {
      set_config_value(config, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const KeyDef& def : key_table()) {
    out += def.name;
    out += '=';
    out += def.get(config);
    out += '\n';
  }
  return out;
}

void validate(const RunConfig& c) {
  require_positive(c.batch_size, "batch_size");
  require_positive(c.image_size, "image_size");
  require_positive(c.patch_size, "patch_size");
  require_positive(c.channels, "channels");
  require_positive(c.layers, "layers");
  require_positive(c.d_model, "d_model");
  require_positive(c.heads, "heads");
  require_positive(c.d_ff, "d_ff");
  require_positive(c.max_text_len, "max_text_len");
  require_positive(c.visual_vocab, "visual_vocab");
  require_positive(c.code_dim, "code_dim");
  require_positive(c.teacher_dim, "teacher_dim");
  require_positive(c.tokenizer_dim, "tokenizer_dim");
  require_positive(c.tokenizer_heads, "tokenizer_heads");
  require_positive(c.decoder_heads, "decoder_heads");
  if (c.text_vocab_size < text::kNumReserved + 1) {
    throw ConfigError("config key 'text_vocab_size' must exceed the " +
                      std::to_string(text::kNumReserved) + " reserved tokens");
  }
  if (c.image_size % c.patch_size != 0) {
    throw ConfigError("config key 'patch_size' (" + std::to_string(c.patch_size) +
                      ") must divide image_size (" + std::to_string(c.image_size) + ")");
  }
  if (c.d_model % c.heads != 0) {
    throw ConfigError("config key 'heads' (" + std::to_string(c.heads) +
                      ") must divide d_model (" + std::to_string(c.d_model) + ")");
  }
  if (c.tokenizer_dim % c.tokenizer_heads != 0) {
    throw ConfigError("config key 'tokenizer_heads' must divide tokenizer_dim");
  }
  if (c.decoder_layers > 0 && c.code_dim % c.decoder_heads != 0) {
    throw ConfigError("config key 'decoder_heads' must divide code_dim");
  }
  if (c.decoder_layers == 0 && c.teacher_dim != c.code_dim) {
    throw ConfigError("decoder_layers=0 makes the decoder the identity, so teacher_dim (" +
                      std::to_string(c.teacher_dim) + ") must equal code_dim (" +
                      std::to_string(c.code_dim) + ")");
  }
  if (c.fusion_top && *c.fusion_top > c.layers) {
    throw ConfigError("config key 'fusion_top' (" + std::to_string(*c.fusion_top) +
                      ") exceeds layers (" + std::to_string(c.layers) + ")");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw ConfigError("config key 'dropout' must lie in [0, 1)");
  }
  if (c.learning_rate < 0.0) throw ConfigError("config key 'learning_rate' must be >= 0");
  if (c.weight_decay < 0.0) throw ConfigError("config key 'weight_decay' must be >= 0");
  require_fraction(c.text_mask_ratio, "text_mask_ratio");
  require_fraction(c.paired_text_mask_ratio, "paired_text_mask_ratio");
  require_fraction(c.patch_mask_ratio, "patch_mask_ratio");
  const std::size_t grid = c.image_size / c.patch_size;
  const std::size_t target = masking::target_count(grid * grid, c.patch_mask_ratio);
  if (target == 0) {
    throw ConfigError("patch_mask_ratio " + format_double(c.patch_mask_ratio) +
                      " masks no patch on a " + std::to_string(grid) + "x" +
                      std::to_string(grid) + " grid");
  }
  if (c.min_block && (*c.min_block == 0 || *c.min_block > target)) {
    throw ConfigError("config key 'min_block' must lie in [1, " + std::to_string(target) + "]");
  }
}

bool same_architecture(const RunConfig& a, const RunConfig& b) {
  for (const KeyDef& def : key_table()) {
    if (def.architecture && def.get(a) != def.get(b)) return false;
  }
  return true;
}

void adopt_architecture(RunConfig& target, const RunConfig& source) {
  for (const KeyDef& def : key_table()) {
    if (def.architecture) def.set(target, def.get(source));
  }
}

multiway::MultiwayConfig model_config(const RunConfig& c, std::size_t text_vocab,
                                      std::size_t answers) {
  multiway::MultiwayConfig m;
  m.layers = c.layers;
  m.d_model = c.d_model;
  m.heads = c.heads;
  m.d_ff = c.d_ff;
  m.fusion_top = c.effective_fusion_top();
  m.dropout = c.dropout;
  m.visual_vocab = c.visual_vocab;
  m.text_vocab = text_vocab;
  m.answers = answers;
  m.max_text_len = c.max_text_len;
  m.image_h = c.image_size;
  m.image_w = c.image_size;
  m.channels = c.channels;
  m.patch = c.patch_size;
  return m;
}

vision::VqkdConfig tokenizer_config(const RunConfig& c) {
  vision::VqkdConfig v;
  v.image_h = c.image_size;
  v.image_w = c.image_size;
  v.channels = c.channels;
  v.patch = c.patch_size;
  v.encoder_dim = c.tokenizer_dim;
  v.encoder_layers = c.tokenizer_layers;
  v.encoder_heads = c.tokenizer_heads;
  v.codebook_size = c.visual_vocab;
  v.code_dim = c.code_dim;
  v.decoder_layers = c.decoder_layers;
  v.decoder_heads = c.decoder_heads;
  v.teacher_dim = c.teacher_dim;
  return v;
}

}  // namespace mwvqa
