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


#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "moska/attention.hpp"
#include "moska/config.hpp"
#include "moska/error.hpp"
#include "moska/router.hpp"

using namespace moska;

namespace {

// Exhaustive oracle: full sort by (score desc, chunk_id asc).
std::vector<std::uint64_t> SortOracle(std::span<const double> q,
                                      const std::vector<ChunkIndexEntry>& index, std::size_t k) {
  std::vector<std::pair<double, std::uint64_t>> scored;
  for (const auto& e : index) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * e.embedding[j];
    scored.emplace_back(s, e.chunk_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace

TEST_CASE("chunk embedding is the key mean") {
  KVChunk same{0, Matrix(3, 2, {0.5, -1.0, 0.5, -1.0, 0.5, -1.0}), Matrix(3, 2), {}};
  CHECK(chunk_embedding(same) == std::vector<double>{0.5, -1.0});

  KVChunk basis{0, Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}), Matrix(2, 2), {}};
  CHECK(chunk_embedding(basis) == std::vector<double>{0.5, 0.5});

  auto [keys, values] = gen_synthetic(11, 37, 9);
  KVChunk random{0, keys, values, {}};
  const auto emb = chunk_embedding(random);
  for (std::size_t j = 0; j < 9; ++j) {
    long double sum = 0;
    for (std::size_t i = 0; i < 37; ++i) sum += keys(i, j);
    CHECK(std::abs(emb[j] - static_cast<double>(sum / 37)) <= 1e-15);
  }

  KVChunk empty{0, Matrix(0, 4), Matrix(0, 4), {}};
  CHECK_THROWS_AS(chunk_embedding(empty), Error);
}

TEST_CASE("make_chunks assigns dense ids and a short tail") {
  auto [keys, values] = gen_synthetic(3, 10, 4);
  const auto chunks = make_chunks(keys, values, 4);
  REQUIRE(chunks.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) CHECK(chunks[c].chunk_id == c);
  CHECK(chunks[2].length() == 2);
  CHECK(chunks[1].embedding == chunk_embedding(chunks[1]));
  CHECK_THROWS_AS(make_chunks(keys, values, 0), Error);
}

TEST_CASE("route: k >= n selects everything, best first") {
  std::vector<ChunkIndexEntry> index = {{0, {1.0, 0.0}}, {1, {0.0, 2.0}}, {2, {-1.0, 0.0}}};
  const std::vector<double> q = {1.0, 1.0};
  const auto all = route(q, index, 10);
  CHECK(all.selected == std::vector<std::uint64_t>{1, 0, 2});
  CHECK(all.scores == std::vector<double>{2.0, 1.0, -1.0});
  CHECK(route(q, index, 1).selected == std::vector<std::uint64_t>{1});
}

TEST_CASE("route: ties break by ascending chunk_id") {
  std::vector<ChunkIndexEntry> index;
  for (std::uint64_t c = 0; c < 6; ++c) index.push_back({c, {double(c), -double(c)}});
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(route(zero, index, 3).selected == std::vector<std::uint64_t>{0, 1, 2});

  // Tie between ids 4 and 1 must put 1 first regardless of index order.
  std::vector<ChunkIndexEntry> shuffled = {{4, {1.0}}, {0, {0.0}}, {1, {1.0}}};
  const std::vector<double> one = {1.0};
  CHECK(route(one, shuffled, 2).selected == std::vector<std::uint64_t>{1, 4});
}

TEST_CASE("route errors") {
  std::vector<ChunkIndexEntry> index = {{0, {1.0, 0.0}}};
  const std::vector<double> q2 = {1.0, 0.0}, q3 = {1.0, 0.0, 0.0};
  CHECK_THROWS_AS(route(q2, index, 0), Error);
  CHECK_THROWS_AS(route(q2, std::vector<ChunkIndexEntry>{}, 1), Error);
  try {
    route(q3, index, 1);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimensionMismatch);
  }
  CHECK_THROWS_AS(ChunkRouter({{1, {1.0}}}, 1), Error);  // ids not dense
}

TEST_CASE("top-k matches the exhaustive-sort oracle (randomized)") {
  SplitMix64 stream(8);
  for (int i = 0; i < 1000; ++i) {
    SplitMix64 rng(stream.next());
    const std::size_t n = rng.uniform_int(1, 64);
    const std::size_t d = rng.uniform_int(1, 32);
    const std::size_t k = rng.uniform_int(1, n + 2);
    std::vector<ChunkIndexEntry> index;
    const bool coarse = rng.uniform_int(0, 1) == 1;  // coarse values force ties
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<double> e(d);
      for (auto& x : e) x = coarse ? double(rng.uniform_int(0, 2)) : rng.uniform_pm1();
      index.push_back({c, e});
    }
    std::vector<double> q(d);
    for (auto& x : q) x = coarse ? double(rng.uniform_int(0, 1)) : rng.uniform_pm1();
    CHECK(route(q, index, k).selected == SortOracle(q, index, k));
  }
}

TEST_CASE("8 chunks, k = 2") {
  auto [keys, values] = gen_synthetic(2048, 8 * 16, 8);
  const auto chunks = make_chunks(keys, values, 16);
  const ChunkRouter router(chunks, 2);
  const auto q = gen_synthetic(2049, 1, 8).first;
  const auto decision = router.route(q.row(0));
  CHECK(decision.selected.size() == 2);
  CHECK(decision.selected == SortOracle(q.row(0), router.index(), 2));
  CHECK(decision.scores[0] >= decision.scores[1]);
}

TEST_CASE("k derived from sparsity") {
  WorkloadSpec w;
  CHECK(derive_k(w) == 1024);
  w.sparsity = 0.0;
  CHECK(derive_k(w) == w.num_chunks());
  w.shared_len = w.chunk_size;
  w.sparsity = 0.75;
  CHECK(derive_k(w) == 1);
}
