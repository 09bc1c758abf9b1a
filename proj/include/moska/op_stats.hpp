// Copyright 2026 The moska-ref Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MOSKA_OP_STATS_HPP
#define MOSKA_OP_STATS_HPP

#include <string_view>

namespace moska {

enum class OpCategory { kUniqueAttention, kSharedAttention, kWeightsFfn };

std::string_view ToString(OpCategory category);

// FLOPs and bytes read for one decode step of one operation category.
struct OpStats {
  OpCategory category = OpCategory::kUniqueAttention;
  double flops = 0.0;
  double bytes_read = 0.0;

  // 0 when nothing is read.
  double arithmetic_intensity() const { return bytes_read > 0 ? flops / bytes_read : 0.0; }

  OpStats& operator+=(const OpStats& other) {
    flops += other.flops;
    bytes_read += other.bytes_read;
    return *this;
  }
};

}  // namespace moska

#endif  // MOSKA_OP_STATS_HPP
