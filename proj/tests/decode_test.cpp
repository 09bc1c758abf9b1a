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
#include <optional>
#include <tuple>

#include "doctest.h"
#include "moska/attention.hpp"
#include "moska/config.hpp"
#include "moska/decode.hpp"
#include "moska/error.hpp"
#include "moska/perf_model.hpp"
#include "moska/router.hpp"

using namespace moska;

namespace {

struct Scene {
  Matrix queries;
  std::vector<UniqueStore> unique;
  Matrix shared_keys, shared_values;
  std::vector<KVChunk> chunks;
};

Scene MakeScene(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t chunk_len,
                std::size_t n_chunks, std::size_t unique_len) {
  SplitMix64 rng(seed);
  Scene s;
  s.queries = gen_synthetic(rng.next(), n, d).first;
  for (std::size_t i = 0; i < n; ++i) {
    auto [k, v] = gen_synthetic(rng.next(), unique_len, d);
    s.unique.push_back({std::move(k), std::move(v)});
  }
  std::tie(s.shared_keys, s.shared_values) = gen_synthetic(rng.next(), chunk_len * n_chunks, d);
  s.chunks = make_chunks(s.shared_keys, s.shared_values, chunk_len);
  return s;
}

}  // namespace

TEST_CASE("unrouted policies equal full attention over unique + shared") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = MakeScene(seed, 5, 16, 8, 4, 6);
    for (const char* name : {"FlashAttention", "SGLang", "ChunkAttention"}) {
      CAPTURE(name);
      const auto r = decode_step(s.queries, s.unique, s.chunks, nullptr, BuiltinPolicy(name));
      for (std::size_t i = 0; i < 5; ++i) {
        const auto oracle = full_attention(s.queries.row(i),
                                           Matrix::vstack(s.unique[i].keys, s.shared_keys),
                                           Matrix::vstack(s.unique[i].values, s.shared_values),
                                           DefaultScale(16));
        CHECK(relative_error(r.outputs[i], oracle) <= 1e-9);
      }
    }
  }
}

TEST_CASE("routed output equals attention over the selected chunks") {
  const Scene s = MakeScene(4, 6, 8, 16, 8, 5);
  const ChunkRouter router(s.chunks, 3);
  const auto r = decode_step(s.queries, s.unique, s.chunks, &router, BuiltinPolicy("MoSKA"));
  REQUIRE(r.routing.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    auto ids = r.routing[i].selected;
    std::sort(ids.begin(), ids.end());
    Matrix k = s.unique[i].keys, v = s.unique[i].values;
    for (auto c : ids) {
      k = Matrix::vstack(k, s.chunks[c].keys);
      v = Matrix::vstack(v, s.chunks[c].values);
    }
    CHECK(relative_error(r.outputs[i], full_attention(s.queries.row(i), k, v, DefaultScale(8))) <=
          1e-9);
  }
}

TEST_CASE("routing with k = all chunks is bitwise the unrouted pipeline") {
  const Scene s = MakeScene(9, 7, 12, 8, 5, 3);
  const ChunkRouter router(s.chunks, s.chunks.size());
  const auto routed = decode_step(s.queries, s.unique, s.chunks, &router, BuiltinPolicy("MoSKA"));
  const auto plain =
      decode_step(s.queries, s.unique, s.chunks, nullptr, BuiltinPolicy("ChunkAttention"));
  CHECK(routed.outputs == plain.outputs);
}

TEST_CASE("batched and per-query shared attention agree") {
  const Scene s = MakeScene(21, 9, 32, 32, 3, 4);
  const auto gemm = decode_step(s.queries, s.unique, s.chunks, nullptr, BuiltinPolicy("ChunkAttention"));
  const auto gemv = decode_step(s.queries, s.unique, s.chunks, nullptr, BuiltinPolicy("SGLang"));
  CHECK(gemm.stats.shared_gemm_calls == 3);
  CHECK(gemm.stats.shared_gemv_calls == 0);
  CHECK(gemv.stats.shared_gemv_calls == 27);
  for (std::size_t i = 0; i < 9; ++i) CHECK(relative_error(gemm.outputs[i], gemv.outputs[i]) <= 1e-12);
}

TEST_CASE("empty unique store and no shared chunks") {
  Scene s = MakeScene(5, 3, 8, 8, 2, 0);
  const auto r = decode_step(s.queries, s.unique, s.chunks, nullptr, BuiltinPolicy("ChunkAttention"));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(relative_error(r.outputs[i], full_attention(s.queries.row(i), s.shared_keys,
                                                      s.shared_values, DefaultScale(8))) <= 1e-9);
  }
  Scene u = MakeScene(6, 2, 8, 8, 0, 4);
  const auto only_unique =
      decode_step(u.queries, u.unique, u.chunks, nullptr, BuiltinPolicy("FlashAttention"));
  CHECK(relative_error(only_unique.outputs[1],
                       full_attention(u.queries.row(1), u.unique[1].keys, u.unique[1].values,
                                      DefaultScale(8))) <= 1e-12);
  Scene none = MakeScene(7, 1, 4, 8, 0, 0);
  CHECK_THROWS_AS(decode_step(none.queries, none.unique, none.chunks, nullptr,
                              BuiltinPolicy("FlashAttention")),
                  Error);  // nothing to attend to
}

TEST_CASE("policy and router must agree") {
  const Scene s = MakeScene(1, 2, 4, 4, 2, 2);
  const ChunkRouter router(s.chunks, 1);
  auto kind_of = [&](const ChunkRouter* r, const char* policy) {
    try {
      decode_step(s.queries, s.unique, s.chunks, r, BuiltinPolicy(policy));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kIo;  // sentinel: nothing thrown
  };
  CHECK(kind_of(nullptr, "MoSKA") == ErrorKind::kPolicyMismatch);
  CHECK(kind_of(&router, "ChunkAttention") == ErrorKind::kPolicyMismatch);
  CHECK(kind_of(&router, "LongHeads") == ErrorKind::kIo);
  std::vector<UniqueStore> short_unique(1);
  CHECK_THROWS_AS(decode_step(s.queries, short_unique, s.chunks, nullptr, BuiltinPolicy("SGLang")),
                  Error);
}

TEST_CASE("decode op counts agree with the roofline cost model") {
  // Desk-scale model: one layer, one head, so attention_costs counts per head.
  ModelSpec m{1, 1, 1, 8, 1000, 1, 1};
  WorkloadSpec w;
  w.chunk_size = 4;
  w.shared_len = 16;
  w.unique_len = 3;
  w.sparsity = 0.5;
  const std::size_t n = 6;
  const Scene s = MakeScene(77, n, 8, 4, 4, 3);
  DecodeOptions opts;
  opts.accounted_bytes_per_element = 1.0;

  for (const auto& policy : BuiltinPolicies()) {
    CAPTURE(policy.name);
    std::optional<ChunkRouter> router;
    if (policy.sparse_routing) router.emplace(s.chunks, derive_k(w));
    const auto r = decode_step(s.queries, s.unique, s.chunks, router ? &*router : nullptr, policy, opts);
    const auto costs = attention_costs(policy, w, m, n);
    CHECK(r.stats.unique.flops == costs[0].flops);
    CHECK(r.stats.unique.bytes_read == costs[0].bytes_read);
    CHECK(r.stats.shared.flops == costs[1].flops);
    if (!policy.sparse_routing || !policy.shared_batched_gemm) {
      // Routed and batched: the union of selected chunks may exceed k, so
      // bytes are only bounded below by the model.
      CHECK(r.stats.shared.bytes_read == costs[1].bytes_read);
    } else {
      CHECK(r.stats.shared.bytes_read >= costs[1].bytes_read);
      CHECK(r.stats.shared.bytes_read <= 2.0 * 16 * 8);
    }
  }
}
