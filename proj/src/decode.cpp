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

#include "moska/decode.hpp"

#include <algorithm>
#include <string>

#include "moska/error.hpp"

namespace moska {

std::string_view ToString(OpCategory category) {
  switch (category) {
    case OpCategory::kUniqueAttention: return "unique_attention";
    case OpCategory::kSharedAttention: return "shared_attention";
    case OpCategory::kWeightsFfn: return "weights_ffn";
  }
  return "unknown";
}

DecodeResult decode_step(const Matrix& queries, std::span<const UniqueStore> unique,
                         std::span<const KVChunk> shared_chunks, const ChunkRouter* router,
                         const PolicySpec& policy, const DecodeOptions& options) {
  const std::size_t n = queries.rows();
  const std::size_t d = queries.cols();
  if (n == 0) Fail(ErrorKind::kInvalidArgument, "decode_step with zero queries");
  if (unique.size() != n) {
    Fail(ErrorKind::kDimensionMismatch, std::to_string(n) + " queries but " +
                                            std::to_string(unique.size()) + " unique stores");
  }
  if (policy.sparse_routing && router == nullptr) {
    Fail(ErrorKind::kPolicyMismatch, "policy '" + policy.name + "' routes but no router given");
  }
  if (!policy.sparse_routing && router != nullptr) {
    Fail(ErrorKind::kPolicyMismatch,
         "policy '" + policy.name + "' does not route but a router was given");
  }
  for (std::size_t c = 0; c < shared_chunks.size(); ++c) {
    if (shared_chunks[c].chunk_id != c) {
      Fail(ErrorKind::kInvalidArgument, "shared chunk ids must be dense and ascending from 0");
    }
  }
  if (router != nullptr && router->index().size() != shared_chunks.size()) {
    Fail(ErrorKind::kPolicyMismatch, "router index does not cover the shared chunks");
  }

  const double scale = options.scale > 0 ? options.scale : DefaultScale(d);
  const double bpe = options.accounted_bytes_per_element;
  DecodeResult result;
  DecodeStats& stats = result.stats;

  // Per-query chunk selection, ascending chunk_id (the fold order).
  std::vector<std::vector<std::uint64_t>> selection(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (router != nullptr && !shared_chunks.empty()) {
      RoutingDecision decision = router->route(queries.row(i));
      selection[i] = decision.selected;
      std::sort(selection[i].begin(), selection[i].end());
      result.routing.push_back(std::move(decision));
    } else if (router == nullptr) {
      for (std::size_t c = 0; c < shared_chunks.size(); ++c) selection[i].push_back(c);
    }
  }

  // shared_partials[i][c] is meaningful only for chunks query i selected.
  std::vector<std::vector<PartialAttention>> shared_partials(
      n, std::vector<PartialAttention>(shared_chunks.size()));

  if (policy.shared_batched_gemm) {
    for (std::size_t c = 0; c < shared_chunks.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::binary_search(selection[i].begin(), selection[i].end(), c)) members.push_back(i);
      }
      if (members.empty()) continue;
      Matrix batch(members.size(), d);
      for (std::size_t r = 0; r < members.size(); ++r) {
        std::copy_n(queries.row(members[r]).begin(), d, batch.row(r).begin());
      }
      auto partials = batched_shared_attention(batch, shared_chunks[c], scale);
      for (std::size_t r = 0; r < members.size(); ++r) {
        shared_partials[members[r]][c] = std::move(partials[r]);
      }
      const double len = static_cast<double>(shared_chunks[c].length());
      stats.shared.flops += 4.0 * len * static_cast<double>(d * members.size());
      stats.shared.bytes_read += 2.0 * len * static_cast<double>(d) * bpe;
      ++stats.shared_gemm_calls;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto c : selection[i]) {
        shared_partials[i][c] = attend_chunk(queries.row(i), shared_chunks[c], scale);
        const double len = static_cast<double>(shared_chunks[c].length());
        stats.shared.flops += 4.0 * len * static_cast<double>(d);
        stats.shared.bytes_read += 2.0 * len * static_cast<double>(d) * bpe;
        ++stats.shared_gemv_calls;
      }
    }
  }

  result.outputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = queries.row(i);
    PartialAttention own = attend(q, unique[i].keys, unique[i].values, scale);
    const double len = static_cast<double>(unique[i].keys.rows());
    stats.unique.flops += 4.0 * len * static_cast<double>(d);
    stats.unique.bytes_read += 2.0 * len * static_cast<double>(d) * bpe;
    ++stats.unique_gemv_calls;

    PartialAttention shared = PartialAttention::Identity(d);
    for (auto c : selection[i]) shared = merge_partials(shared, shared_partials[i][c]);
    result.outputs.push_back(finalize(merge_partials(own, shared)));
  }
  return result;
}

}  // namespace moska
