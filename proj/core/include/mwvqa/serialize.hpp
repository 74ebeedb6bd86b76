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

#ifndef MWVQA_SERIALIZE_HPP_
#define MWVQA_SERIALIZE_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "mwvqa/tensor.hpp"

namespace mwvqa {

// Binary tensor record: "MWT1", rank (u32), dims (u32 each), then the raw
// float64 values. All integers and floats little-endian.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in);
void write_string(std::ostream& out, const std::string& s);
std::string read_string(std::istream& in);

}  // namespace mwvqa

#endif  // MWVQA_SERIALIZE_HPP_
