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

#include "mwvqa/synthetic.hpp"

#include <array>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "mwvqa/dataset.hpp"
#include "mwvqa/errors.hpp"
#include "mwvqa/ppm.hpp"
#include "mwvqa/rng.hpp"
#include "mwvqa/tensor.hpp"

namespace mwvqa {
namespace {

struct Color {
  const char* name;
  std::array<double, 3> rgb;
};

constexpr std::array<Color, 3> kColors = {{
    {"đỏ", {1.0, 0.0, 0.0}},
    {"lục", {0.0, 1.0, 0.0}},
    {"lam", {0.0, 0.0, 1.0}},
}};
constexpr std::array<const char*, 2> kObjects = {"hộp", "que"};
constexpr std::array<const char*, 2> kSides = {"trái", "phải"};
constexpr std::array<const char*, 3> kCounts = {"một", "hai", "ba"};

struct Scene {
  std::size_t color = 0;
  std::size_t object = 0;
  std::size_t side = 0;
  std::vector<std::size_t> cells;  // sorted grid cells

  auto key() const { return std::tie(color, object, side, cells); }
  bool operator<(const Scene& o) const { return key() < o.key(); }
};

struct Question {
  QuestionType type;
  const char* text;
};

constexpr std::array<Question, 4> kQuestions = {{
    {QuestionType::Color, "các vật có màu gì"},
    {QuestionType::Number, "có bao nhiêu vật"},
    {QuestionType::Location, "các vật nằm ở bên nào"},
    {QuestionType::Object, "đây là vật gì"},
}};

// Only the asked attribute varies, plus the side. The remaining attributes
// keep fixed values, and objects fill cells in row-major order from the top
// of their half, so every scene is learnable from a few examples per type.
Scene draw_scene(std::size_t grid, Rng& rng, QuestionType type) {
  Scene s;
  std::size_t count = 1;
  if (type == QuestionType::Color) s.color = rng.uniform_index(kColors.size());
  if (type == QuestionType::Object) s.object = rng.uniform_index(kObjects.size());
  if (type == QuestionType::Number) count = 1 + rng.uniform_index(kCounts.size());
  s.side = rng.uniform_index(kSides.size());
  const std::size_t half = grid / 2;
  for (std::size_t r = 0; r < grid && s.cells.size() < count; ++r) {
    for (std::size_t c = 0; c < half && s.cells.size() < count; ++c) {
      s.cells.push_back(r * grid + (s.side == 0 ? c : grid - half + c));
    }
  }
  return s;
}

Tensor render(const Scene& s, std::size_t size, std::size_t patch) {
  const std::size_t grid = size / patch;
  Tensor image(Shape{size, size, 3});
  auto px = image.mutable_data();
  auto paint = [&](std::size_t y, std::size_t x) {
    for (std::size_t ch = 0; ch < 3; ++ch) px[(y * size + x) * 3 + ch] = kColors[s.color].rgb[ch];
  };
  // A box fills its cell; a stick is the middle column pair.
  for (std::size_t cell : s.cells) {
    const std::size_t y0 = (cell / grid) * patch;
    const std::size_t x0 = (cell % grid) * patch;
    for (std::size_t y = 0; y < patch; ++y) {
      for (std::size_t x = 0; x < patch; ++x) {
        const bool stick_px = 2 * x + 2 >= patch && 2 * x <= patch;
        if (s.object == 0 || stick_px) paint(y0 + y, x0 + x);
      }
    }
  }
  return image;
}

std::pair<std::string, std::vector<std::string>> answer_for(const Scene& s, QuestionType type) {
  auto all = [](const auto& names) {
    return std::vector<std::string>(std::begin(names), std::end(names));
  };
  switch (type) {
    case QuestionType::Color: {
      std::vector<std::string> names;
      for (const Color& c : kColors) names.emplace_back(c.name);
      return {kColors[s.color].name, names};
    }
    case QuestionType::Number:
      return {kCounts[s.cells.size() - 1], all(kCounts)};
    case QuestionType::Location:
      return {kSides[s.side], all(kSides)};
    case QuestionType::Object:
      break;
  }
  return {kObjects[s.object], all(kObjects)};
}

std::string taxonomy_text() {
  std::string out;
  const std::string root = "thực thể";
  auto edge = [&](const std::string& parent, const std::string& child) {
    out += parent + "\t" + child + "\n";
  };
  edge(root, "màu sắc");
  edge(root, "số lượng");
  edge(root, "vị trí");
  edge(root, "đồ vật");
  for (const Color& c : kColors) edge("màu sắc", c.name);
  for (const char* n : kCounts) edge("số lượng", n);
  for (const char* n : kSides) edge("vị trí", n);
  for (const char* n : kObjects) edge("đồ vật", n);
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void gen_synthetic(const std::filesystem::path& out_dir, const SyntheticSpec& spec) {
  if (spec.n == 0) throw ContractError("gen_synthetic: n must be at least 1");
  if (spec.patch == 0 || spec.image_size % spec.patch != 0) {
    throw PatchSizeError("gen_synthetic: patch " + std::to_string(spec.patch) +
                         " does not divide image size " + std::to_string(spec.image_size));
  }
  const std::size_t grid = spec.image_size / spec.patch;
  if ((grid / 2) * grid < kCounts.size()) {
    throw ContractError("gen_synthetic: a " + std::to_string(grid) + "x" +
                        std::to_string(grid) + " grid is too small for three objects per half");
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  Rng rng(spec.seed);
  std::map<Scene, std::string> image_names;
  auto emit = [&](std::size_t count, const char* id_prefix) {
    std::string lines;
    for (std::size_t i = 0; i < count; ++i) {
      // Question types cycle so that every type is equally represented.
      const Question& q = kQuestions[i % kQuestions.size()];
      const Scene scene = draw_scene(grid, rng, q.type);
      auto [it, inserted] = image_names.try_emplace(scene, "");
      if (inserted) {
        char name[32];
        std::snprintf(name, sizeof(name), "images/img_%04zu.ppm", image_names.size() - 1);
        it->second = name;
        write_image_ppm(out_dir / it->second, render(scene, spec.image_size, spec.patch));
      }
      const auto [answer, options] = answer_for(scene, q.type);
      char id[32];
      std::snprintf(id, sizeof(id), "%s%04zu", id_prefix, i);
      nlohmann::ordered_json line;
      line["id"] = id;
      line["image"] = it->second;
      line["question"] = q.text;
      line["answer"] = answer;
      line["type"] = std::string(to_string(q.type));
      line["options"] = options;
      lines += line.dump() + "\n";
    }
    return lines;
  };
  write_file(out_dir / "dataset.jsonl", emit(spec.n, "q"));
  write_file(out_dir / "test.jsonl", emit(spec.test_n, "t"));
  write_file(out_dir / "taxonomy.tsv", taxonomy_text());
}

}  // namespace mwvqa
