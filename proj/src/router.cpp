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

#include "moska/router.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "moska/error.hpp"

namespace moska {

std::vector<double> chunk_embedding(const KVChunk& chunk) {
  if (chunk.length() == 0) Fail(ErrorKind::kInvalidArgument, "embedding of an empty chunk");
  std::vector<double> mean(chunk.head_dim(), 0.0);
  for (std::size_t i = 0; i < chunk.length(); ++i) {
    const auto k = chunk.keys.row(i);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += k[j];
  }
  const double n = static_cast<double>(chunk.length());
  for (auto& x : mean) x /= n;
  return mean;
}

std::vector<KVChunk> make_chunks(const Matrix& keys, const Matrix& values,
                                 std::size_t chunk_len) {
  if (chunk_len == 0) Fail(ErrorKind::kInvalidArgument, "chunk_len must be >= 1");
  if (keys.rows() != values.rows()) {
    Fail(ErrorKind::kDimensionMismatch, "keys and values differ in row count");
  }
  std::vector<KVChunk> chunks;
  for (std::size_t begin = 0; begin < keys.rows(); begin += chunk_len) {
    const std::size_t end = std::min(keys.rows(), begin + chunk_len);
    KVChunk c;
    c.chunk_id = chunks.size();
    c.keys = keys.slice_rows(begin, end);
    c.values = values.slice_rows(begin, end);
    c.embedding = chunk_embedding(c);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::vector<ChunkIndexEntry> build_index(std::span<const KVChunk> chunks) {
  std::vector<ChunkIndexEntry> index;
  index.reserve(chunks.size());
  for (const auto& c : chunks) index.push_back({c.chunk_id, chunk_embedding(c)});
  return index;
}

RoutingDecision route(std::span<const double> q, std::span<const ChunkIndexEntry> index,
                      std::size_t k) {
  if (k < 1) Fail(ErrorKind::kInvalidArgument, "route: k must be >= 1");
  if (index.empty()) Fail(ErrorKind::kInvalidArgument, "route: empty chunk index");

  std::vector<double> scores(index.size());
  for (std::size_t c = 0; c < index.size(); ++c) {
    const auto& e = index[c].embedding;
    if (e.size() != q.size()) {
      Fail(ErrorKind::kDimensionMismatch,
           "route: embedding of chunk " + std::to_string(index[c].chunk_id) + " has length " +
               std::to_string(e.size()) + ", query " + std::to_string(q.size()));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * e[j];
    scores[c] = s;
  }

  const std::size_t keep = std::min(k, index.size());
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index[a].chunk_id < index[b].chunk_id;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                    order.end(), better);

  RoutingDecision d;
  d.selected.reserve(keep);
  d.scores.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    d.selected.push_back(index[order[i]].chunk_id);
    d.scores.push_back(scores[order[i]]);
  }
  return d;
}

ChunkRouter::ChunkRouter(std::vector<ChunkIndexEntry> index, std::size_t k)
    : index_(std::move(index)), k_(k) {
  if (k_ < 1) Fail(ErrorKind::kInvalidArgument, "router k must be >= 1");
  for (std::size_t i = 0; i < index_.size(); ++i) {
    if (index_[i].chunk_id != i) {
      Fail(ErrorKind::kInvalidArgument, "chunk index ids must be dense from 0");
    }
  }
}

}  // namespace moska
