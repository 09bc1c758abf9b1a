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

// One decode step for N concurrent requests that each own a unique KV store
// and share a chunked KV store:
//
//   1. route each query to its top-k shared chunks (sparse policies only),
//   2. shared attention per chunk, batching every query that selected the
//      chunk into one GEMM when the policy allows, else one GEMV per query,
//   3. unique attention per query (always GEMV),
//   4. out_i = finalize(merge(unique_i, fold of shared partials)), where the
//      fold runs over the selected chunks in ascending chunk_id.

#ifndef MOSKA_DECODE_HPP
#define MOSKA_DECODE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "moska/attention.hpp"
#include "moska/config.hpp"
#include "moska/op_stats.hpp"
#include "moska/router.hpp"

namespace moska {

struct UniqueStore {
  Matrix keys;
  Matrix values;
};

struct DecodeOptions {
  double scale = 0.0;  // 0 selects 1/sqrt(head_dim)
  // Width charged per K/V element in the byte accounting. The numerics are
  // always double; this only lets tests line the counts up with a ModelSpec.
  double accounted_bytes_per_element = sizeof(double);
};

struct DecodeStats {
  OpStats unique{OpCategory::kUniqueAttention};
  OpStats shared{OpCategory::kSharedAttention};
  std::uint64_t shared_gemm_calls = 0;  // batched_shared_attention invocations
  std::uint64_t shared_gemv_calls = 0;  // single-query shared attends
  std::uint64_t unique_gemv_calls = 0;
};

struct DecodeResult {
  std::vector<std::vector<double>> outputs;  // one per query
  std::vector<RoutingDecision> routing;      // empty unless routed
  DecodeStats stats;
};

// `router` must be non-null iff policy.sparse_routing.
DecodeResult decode_step(const Matrix& queries, std::span<const UniqueStore> unique,
                         std::span<const KVChunk> shared_chunks, const ChunkRouter* router,
                         const PolicySpec& policy, const DecodeOptions& options = {});

}  // namespace moska

#endif  // MOSKA_DECODE_HPP
