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


// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 only if
// all pass. Tolerances are fixed here and never read from the environment.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "moska/attention.hpp"
#include "moska/config.hpp"
#include "moska/decode.hpp"
#include "moska/perf_model.hpp"
#include "moska/report.hpp"
#include "moska/router.hpp"
#include "moska/verify.hpp"

using namespace moska;

namespace {

constexpr int kCases = 1000;
constexpr double kChunkTol = 1e-9;
constexpr double kBatchTol = 1e-12;
constexpr double kEquivalenceBudgetS = 30.0;
constexpr double kSweepBudgetS = 5.0;
constexpr double kFaMaxBatchCeiling = 4;
constexpr double kMoskaMaxBatchFloor = 200;
constexpr double kPeakFloor = 100.0;
constexpr double kSharedMfuFloor = 0.80;
constexpr double kSharedCapDrift = 0.01;
constexpr double kUniqueMfuCeiling = 0.10;
constexpr double kUniqueCapR2 = 0.999;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome Equivalence() {
  const auto start = std::chrono::steady_clock::now();
  SplitMix64 stream(0xACCE97);
  double worst_chunk = 0.0, worst_batch = 0.0;
  for (int i = 0; i < kCases; ++i) {
    SplitMix64 rng(stream.next());
    const std::size_t tokens = rng.uniform_int(1, 512);
    const std::size_t d = rng.uniform_int(4, 128);
    const std::size_t n_chunks = rng.uniform_int(1, std::min<std::size_t>(8, tokens));
    const std::size_t n_queries = rng.uniform_int(1, 64);
    auto [keys, values] = gen_synthetic(rng.next(), tokens, d);
    const Matrix queries = gen_synthetic(rng.next(), n_queries, d).first;
    const double scale = DefaultScale(d);

    // Random cut points, every chunk non-empty.
    std::vector<std::size_t> cuts = {0, tokens};
    while (cuts.size() < n_chunks + 1) {
      const std::size_t c = rng.uniform_int(1, tokens - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());

    const auto q0 = queries.row(0);
    PartialAttention acc = PartialAttention::Identity(d);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      acc = merge_partials(acc, attend(q0, keys.slice_rows(cuts[c], cuts[c + 1]),
                                       values.slice_rows(cuts[c], cuts[c + 1]), scale));
    }
    worst_chunk = std::max(worst_chunk,
                           relative_error(finalize(acc), full_attention(q0, keys, values, scale)));

    const KVChunk chunk{0, keys, values, {}};
    const auto batched = batched_shared_attention(queries, chunk, scale);
    for (std::size_t r = 0; r < n_queries; ++r) {
      worst_batch = std::max(worst_batch, relative_error(finalize(batched[r]),
                                                         finalize(attend_chunk(queries.row(r), chunk, scale))));
    }
  }
  const double t = Seconds(start);
  Outcome o;
  o.pass = worst_chunk <= kChunkTol && worst_batch <= kBatchTol && t < kEquivalenceBudgetS;
  o.detail = Fmt("chunk max rel err %.3g", worst_chunk) + Fmt(", batch max rel err %.3g", worst_batch) +
             Fmt(", %.2f s", t);
  return o;
}

Outcome RouterCoverage() {
  SplitMix64 stream(0xC0FE);
  int bitwise_mismatch = 0, oracle_mismatch = 0;
  for (int i = 0; i < kCases; ++i) {
    SplitMix64 rng(stream.next());
    const std::size_t d = rng.uniform_int(4, 32);
    const std::size_t chunk_len = rng.uniform_int(1, 32);
    const std::size_t n_chunks = rng.uniform_int(1, 8);
    const std::size_t n = rng.uniform_int(1, 8);
    auto [sk, sv] = gen_synthetic(rng.next(), chunk_len * n_chunks, d);
    const auto chunks = make_chunks(sk, sv, chunk_len);
    const Matrix queries = gen_synthetic(rng.next(), n, d).first;
    std::vector<UniqueStore> unique;
    for (std::size_t q = 0; q < n; ++q) {
      auto [uk, uv] = gen_synthetic(rng.next(), rng.uniform_int(0, 16), d);
      unique.push_back({uk, uv});
    }
    if (i % 10 == 0) {  // full pipelines are the slow part
      const ChunkRouter all(chunks, chunks.size());
      const auto routed = decode_step(queries, unique, chunks, &all, BuiltinPolicy("MoSKA"));
      const auto plain = decode_step(queries, unique, chunks, nullptr, BuiltinPolicy("ChunkAttention"));
      if (routed.outputs != plain.outputs) ++bitwise_mismatch;
    }

    // Top-k against a full sort of (score desc, id asc).
    const auto index = build_index(chunks);
    const std::size_t k = rng.uniform_int(1, n_chunks);
    const auto q = queries.row(0);
    std::vector<std::pair<double, std::uint64_t>> scored;
    for (const auto& e : index) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += q[j] * e.embedding[j];
      scored.emplace_back(-s, e.chunk_id);
    }
    std::sort(scored.begin(), scored.end());
    const auto got = route(q, index, k).selected;
    for (std::size_t r = 0; r < k; ++r) {
      if (got[r] != scored[r].second) {
        ++oracle_mismatch;
        break;
      }
    }
  }
  Outcome o;
  o.pass = bitwise_mismatch == 0 && oracle_mismatch == 0;
  o.detail = std::to_string(kCases / 10) + " pipelines, " + std::to_string(bitwise_mismatch) +
             " not bitwise equal; " + std::to_string(kCases) + " top-k instances, " +
             std::to_string(oracle_mismatch) + " oracle mismatches";
  return o;
}

Outcome BandwidthDichotomy() {
  const ExperimentConfig cfg;
  int violations = 0;
  for (const char* name : {"ChunkAttention", "MoSKA", "SGLang", "FlashAttention"}) {
    const auto& p = BuiltinPolicy(name);
    const double b1 = attention_costs(p, cfg.workload, cfg.model, 1)[1].bytes_read;
    for (std::uint64_t b = 1; b <= 256; b *= 2) {
      const double bytes = attention_costs(p, cfg.workload, cfg.model, b)[1].bytes_read;
      const double expected = p.shared_batched_gemm ? b1 : b1 * static_cast<double>(b);
      if (bytes != expected) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " inexact points over 4 policies x 9 batches"};
}

Outcome MaxBatchOrdering() {
  const ExperimentConfig cfg;
  bool ok = true;
  std::string detail;
  std::uint64_t fa16 = 0, moska16 = 0;
  for (auto len : cfg.workload.sweep_shared_lens) {
    const WorkloadSpec w = cfg.workload.with_shared_len(len);
    auto mb = [&](const char* n) { return max_batch(BuiltinPolicy(n), w, cfg.model, cfg.hardware); };
    ok = ok && mb("MoSKA") == mb("ChunkAttention") && mb("ChunkAttention") == mb("SGLang") &&
         mb("SGLang") > mb("LongHeads") && mb("LongHeads") == mb("FlashAttention");
    detail += std::to_string(len >> 20) + "M:" + std::to_string(mb("MoSKA")) + "/" +
              std::to_string(mb("FlashAttention")) + " ";
    if (len == 16u << 20) {
      fa16 = mb("FlashAttention");
      moska16 = mb("MoSKA");
    }
  }
  ok = ok && fa16 <= kFaMaxBatchCeiling && moska16 >= kMoskaMaxBatchFloor;
  detail.pop_back();
  return {ok, "MoSKA/FA max batch " + detail};
}

Outcome ThroughputClaim() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg;
  const auto sweep = throughput(cfg);
  bool monotone = true;
  double prev = 0.0;
  std::string detail;
  for (auto len : cfg.workload.sweep_shared_lens) {
    const double r = sweep.summary("MoSKA", len)->normalized_throughput;
    monotone = monotone && r > prev;
    prev = r;
    detail += Fmt("%.1fx ", r);
  }
  const PeakRatio peak = PeakNormalizedThroughput(sweep);
  const double t = Seconds(start);
  Outcome o;
  o.pass = monotone && peak.shared_len == (16u << 20) && peak.ratio > kPeakFloor && t < kSweepBudgetS;
  o.detail = "ratios " + detail + Fmt("| peak %.1fx", peak.ratio) +
             Fmt(" vs reported %.1fx", kReportedPeakRatio) + Fmt(", %.3f s", t);
  return o;
}

Outcome NodeUtilization() {
  const ExperimentConfig cfg;  // one unique and one shared node, 8 GPUs each
  const auto at256 = node_utilization(cfg.workload, cfg.model, cfg.hardware, 256);
  double cap_lo = 1e300, cap_hi = -1e300;
  std::vector<double> xs, ys;
  for (std::uint64_t b = 1; b <= 256; b *= 2) {
    const auto p = node_utilization(cfg.workload, cfg.model, cfg.hardware, b);
    cap_lo = std::min(cap_lo, p[1].cap_util);
    cap_hi = std::max(cap_hi, p[1].cap_util);
    xs.push_back(static_cast<double>(b));
    ys.push_back(p[0].cap_util);
  }
  for (std::uint64_t b : {3u, 24u, 100u, 200u}) {
    xs.push_back(static_cast<double>(b));
    ys.push_back(node_utilization(cfg.workload, cfg.model, cfg.hardware, b)[0].cap_util);
  }
  // Ordinary least squares R^2.
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);

  Outcome o;
  o.pass = at256[1].mfu >= kSharedMfuFloor && cap_hi - cap_lo <= kSharedCapDrift &&
           at256[0].mfu <= kUniqueMfuCeiling && r2 >= kUniqueCapR2;
  o.detail = Fmt("shared mfu %.3f", at256[1].mfu) + Fmt(", shared cap drift %.3g", cap_hi - cap_lo) +
             Fmt(", unique mfu %.4f", at256[0].mfu) + Fmt(", unique cap R^2 %.6f", r2);
  return o;
}

Outcome Determinism() {
  const ExperimentConfig cfg;
  auto sweep_body = [&](const char* ts) {
    return DataSection(SweepCsv(MakeManifest("sweep", cfg, 42, ts), throughput(cfg)));
  };
  VerifyOptions vo;
  vo.seed = 42;
  vo.trace = true;
  vo.cases = 200;
  auto verify_body = [&](const char* ts) {
    return DataSection(VerifyCsv(MakeManifest("verify", cfg, 42, ts), run_verify(cfg, vo)));
  };
  const bool sweep_same = sweep_body("a") == sweep_body("b");
  const bool verify_same = verify_body("a") == verify_body("b");
  return {sweep_same && verify_same, std::string("sweep ") + (sweep_same ? "identical" : "differs") +
                                          ", verify " + (verify_same ? "identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"equivalence suite", Equivalence},
      {"router coverage", RouterCoverage},
      {"bandwidth-scaling dichotomy", BandwidthDichotomy},
      {"max-batch ordering", MaxBatchOrdering},
      {"throughput claim", ThroughputClaim},
      {"node utilization", NodeUtilization},
      {"determinism", Determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
