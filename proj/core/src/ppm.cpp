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

#include "mwvqa/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mwvqa/errors.hpp"

namespace mwvqa {
namespace {

class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = static_cast<unsigned char>(bytes_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > 1000000) throw FormatError(source_ + ": implausible PPM " + what);
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError(source_ + ": missing PPM " + what);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor decode_ppm(std::string_view bytes, std::size_t expected_h, std::size_t expected_w,
                  const std::string& source) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P6") {
    throw FormatError(source + ": not a binary PPM (magic must be P6)");
  }
  HeaderReader reader(bytes, source);
  reader.advance(2);
  const std::size_t width = reader.number("width");
  const std::size_t height = reader.number("height");
  const std::size_t maxval = reader.number("maxval");
  if (maxval != 255) {
    throw FormatError(source + ": PPM maxval must be 255, got " + std::to_string(maxval));
  }
  if (reader.pos() >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[reader.pos()]))) {
    throw FormatError(source + ": PPM header must end with one whitespace byte");
  }
  reader.advance(1);
  if (width != expected_w || height != expected_h) {
    throw FormatError(source + ": image is " + std::to_string(width) + "x" +
                      std::to_string(height) + ", expected " + std::to_string(expected_w) +
                      "x" + std::to_string(expected_h));
  }
  const std::size_t n = width * height * 3;
  if (bytes.size() - reader.pos() < n) {
    throw FormatError(source + ": PPM pixel data truncated (" +
                      std::to_string(bytes.size() - reader.pos()) + " of " +
                      std::to_string(n) + " bytes)");
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<unsigned char>(bytes[reader.pos() + i]) / 255.0;
  }
  return Tensor(Shape{height, width, 3}, std::move(values));
}

Tensor load_image_ppm(const std::filesystem::path& path, std::size_t expected_h,
                      std::size_t expected_w) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_ppm(buf.str(), expected_h, expected_w, path.string());
}

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("encode_ppm: expected [H x W x 3], got " + shape_string(image.shape()));
  }
  std::string out = "P6\n" + std::to_string(image.dim(1)) + " " +
                    std::to_string(image.dim(0)) + "\n255\n";
  for (double v : image.data()) {
    const double level = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
  }
  return out;
}

void write_image_ppm(const std::filesystem::path& path, const Tensor& image) {
  const std::string bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image " + path.string());
}

}  // namespace mwvqa
