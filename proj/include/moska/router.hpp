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

// Training-free top-k chunk router. A chunk's embedding is the arithmetic
// mean of its key rows; a query scores each chunk by inner product and keeps
// the k best, ties going to the lower chunk_id.

#ifndef MOSKA_ROUTER_HPP
#define MOSKA_ROUTER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "moska/attention.hpp"

namespace moska {

struct ChunkIndexEntry {
  std::uint64_t chunk_id = 0;
  std::vector<double> embedding;
};

struct RoutingDecision {
  std::vector<std::uint64_t> selected;  // best first
  std::vector<double> scores;           // parallel to `selected`
};

std::vector<double> chunk_embedding(const KVChunk& chunk);

// Splits a KV sequence into consecutive chunks of `chunk_len` rows (the last
// one may be shorter), ids dense from 0, embeddings filled in.
std::vector<KVChunk> make_chunks(const Matrix& keys, const Matrix& values,
                                 std::size_t chunk_len);

std::vector<ChunkIndexEntry> build_index(std::span<const KVChunk> chunks);

RoutingDecision route(std::span<const double> q, std::span<const ChunkIndexEntry> index,
                      std::size_t k);

// Index plus a fixed k, as handed to the decode pipeline.
class ChunkRouter {
 public:
  ChunkRouter(std::vector<ChunkIndexEntry> index, std::size_t k);
  ChunkRouter(std::span<const KVChunk> chunks, std::size_t k)
      : ChunkRouter(build_index(chunks), k) {}

  RoutingDecision route(std::span<const double> q) const {
    return moska::route(q, index_, k_);
  }
  std::size_t k() const { return k_; }
  const std::vector<ChunkIndexEntry>& index() const { return index_; }

 private:
  std::vector<ChunkIndexEntry> index_;
  std::size_t k_;
};

}  // namespace moska

#endif  // MOSKA_ROUTER_HPP
