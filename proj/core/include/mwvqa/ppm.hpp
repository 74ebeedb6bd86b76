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

#ifndef MWVQA_PPM_HPP_
#define MWVQA_PPM_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "mwvqa/tensor.hpp"

namespace mwvqa {

// Binary P6 with maxval 255 only. Returns [H x W x 3] scaled to [0, 1].
// Throws FormatError on a bad header, short pixel data or a size other
// than expected_h x expected_w.
Tensor decode_ppm(std::string_view bytes, std::size_t expected_h, std::size_t expected_w,
                  const std::string& source = "<memory>");
Tensor load_image_ppm(const std::filesystem::path& path, std::size_t expected_h,
                      std::size_t expected_w);

// [H x W x 3] in [0, 1], rounded to the nearest of 256 levels.
std::string encode_ppm(const Tensor& image);
void write_image_ppm(const std::filesystem::path& path, const Tensor& image);

}  // namespace mwvqa

#endif  // MWVQA_PPM_HPP_
