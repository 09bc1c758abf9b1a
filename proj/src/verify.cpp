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

#include "moska/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "moska/attention.hpp"
#include "moska/decode.hpp"
#include "moska/router.hpp"

namespace moska {

namespace {

using MergeFn = std::function<PartialAttention(const PartialAttention&, const PartialAttention&)>;

MergeFn MakeMerge(Fault fault) {
  if (fault == Fault::kMergeSign) {
    return [](const PartialAttention& a, const PartialAttention& b) {
      PartialAttention flipped = b;
      for (auto& x : flipped.acc) x = -x;
      return merge_partials(a, flipped);
    };
  }
  return merge_partials;
}

// Accumulates the worst error of one property over its cases.
class Check {
 public:
  Check(std::string name, double tolerance) {
    result_.name = std::move(name);
    result_.tolerance = tolerance;
  }

  void record(std::uint64_t case_seed, double error) {
    ++result_.cases;
    // NaN counts as a failure.
    const bool ok = error <= result_.tolerance;
    if (!(error <= result_.max_error)) result_.max_error = error;
    if (!ok && result_.passed) {
      result_.passed = false;
      result_.failing_seed = case_seed;
    }
  }
  void record_exact(std::uint64_t case_seed, bool equal) { record(case_seed, equal ? 0.0 : 1.0); }

  PropertyResult result() const { return result_; }

 private:
  PropertyResult result_;
};

// Seed stream for one property, independent of the other properties.
SplitMix64 PropertyStream(std::uint64_t seed, std::uint64_t salt) {
  SplitMix64 mix(seed ^ (salt * 0xD1B54A32D192ED03ULL));
  return SplitMix64(mix.next());
}

Matrix RandomQueries(SplitMix64& rng, std::size_t n, std::size_t d) {
  Matrix q = gen_synthetic(rng.next(), n, d).first;
  // Random sharpness so that both flat and peaked softmax rows occur.
  const double gain = 1.0 + 7.0 * (rng.uniform_pm1() + 1.0) / 2.0;
  for (std::size_t i = 0; i < n; ++i)
    for (auto& x : q.row(i)) x *= gain;
  return q;
}

// Random partition of n rows into `parts` nonempty consecutive chunks.
std::vector<std::size_t> RandomCuts(SplitMix64& rng, std::size_t n, std::size_t parts) {
  std::vector<std::size_t> all(n - 1);
  std::iota(all.begin(), all.end(), std::size_t{1});
  for (std::size_t i = 0; i + 1 < parts; ++i) {
    std::swap(all[i], all[i + rng.uniform_int(0, all.size() - 1 - i)]);
  }
  std::vector<std::size_t> cuts(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(parts - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(n);
  return cuts;
}

std::vector<PartialAttention> ChunkPartials(std::span<const double> q, const Matrix& keys,
                                            const Matrix& values,
                                            const std::vector<std::size_t>& cuts, double scale) {
  std::vector<PartialAttention> parts;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    parts.push_back(attend(q, keys.slice_rows(cuts[c], cuts[c + 1]),
                           values.slice_rows(cuts[c], cuts[c + 1]), scale));
  }
  return parts;
}

PartialAttention Fold(const std::vector<PartialAttention>& parts, std::size_t d,
                      const MergeFn& merge) {
  PartialAttention acc = PartialAttention::Identity(d);
  for (const auto& p : parts) acc = merge(acc, p);
  return acc;
}

PropertyResult ChunkingInvariance(const VerifyOptions& opt, const MergeFn& merge) {
  Check check("chunking invariance", kChunkingTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 1);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t n = rng.uniform_int(1, kVerifyMaxTokens);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const std::size_t parts = rng.uniform_int(1, std::min(kVerifyMaxChunks, n));
    auto [keys, values] = gen_synthetic(rng.next(), n, d);
    const Matrix q = RandomQueries(rng, 1, d);
    const double scale = DefaultScale(d);
    const auto cuts = RandomCuts(rng, n, parts);
    const auto merged = finalize(Fold(ChunkPartials(q.row(0), keys, values, cuts, scale), d, merge));
    check.record(cs, relative_error(merged, full_attention(q.row(0), keys, values, scale)));
  }
  return check.result();
}

PropertyResult BatchingInvariance(const VerifyOptions& opt) {
  Check check("batching invariance", kExactTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 2);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t n = rng.uniform_int(1, kVerifyMaxQueries);
    const std::size_t len = rng.uniform_int(1, kVerifyMaxTokens);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    auto [keys, values] = gen_synthetic(rng.next(), len, d);
    KVChunk chunk{0, std::move(keys), std::move(values), {}};
    const Matrix q = RandomQueries(rng, n, d);
    const double scale = DefaultScale(d);
    const auto batched = batched_shared_attention(q, chunk, scale);
    double worst = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto looped = attend_chunk(q.row(r), chunk, scale);
      worst = std::max(worst, relative_error(finalize(batched[r]), finalize(looped)));
      worst = std::max(worst, std::abs(batched[r].s - looped.s) / looped.s);
    }
    check.record(cs, worst);
  }
  return check.result();
}

PropertyResult MergeAssociativity(const VerifyOptions& opt, const MergeFn& merge) {
  Check check("merge associativity", kExactTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 3);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const Matrix q = RandomQueries(rng, 1, d);
    std::vector<PartialAttention> p;
    for (int k = 0; k < 3; ++k) {
      auto [keys, values] = gen_synthetic(rng.next(), rng.uniform_int(1, kVerifyMaxTokens / 3), d);
      p.push_back(attend(q.row(0), keys, values, DefaultScale(d)));
    }
    const auto left = finalize(merge(merge(p[0], p[1]), p[2]));
    const auto right = finalize(merge(p[0], merge(p[1], p[2])));
    check.record(cs, relative_error(left, right));
  }
  return check.result();
}

PropertyResult PermutationInvariance(const VerifyOptions& opt, const MergeFn& merge) {
  Check check("permutation invariance", kExactTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 4);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t n = rng.uniform_int(2, kVerifyMaxTokens);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const std::size_t parts = rng.uniform_int(2, std::min(kVerifyMaxChunks, n));
    auto [keys, values] = gen_synthetic(rng.next(), n, d);
    const Matrix q = RandomQueries(rng, 1, d);
    auto partials = ChunkPartials(q.row(0), keys, values, RandomCuts(rng, n, parts), DefaultScale(d));
    const auto ordered = finalize(Fold(partials, d, merge));
    for (std::size_t k = partials.size() - 1; k > 0; --k) {
      std::swap(partials[k], partials[rng.uniform_int(0, k)]);
    }
    check.record(cs, relative_error(finalize(Fold(partials, d, merge)), ordered));
  }
  return check.result();
}

PropertyResult SoftmaxNormalization(const VerifyOptions& opt) {
  Check check("softmax normalization", kExactTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 5);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t n = rng.uniform_int(1, kVerifyMaxTokens);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    auto [keys, values] = gen_synthetic(rng.next(), n, d);
    const Matrix q = RandomQueries(rng, 1, d);
    const double scale = DefaultScale(d);
    const auto p = attend(q.row(0), keys, values, scale);

    std::vector<double> logits(n);
    for (std::size_t r = 0; r < n; ++r) {
      logits[r] = scale * std::inner_product(q.row(0).begin(), q.row(0).end(),
                                             keys.row(r).begin(), 0.0);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double direct = 0.0;
    for (double l : logits) direct += std::exp(l - m);
    double weight_sum = 0.0;
    for (double l : logits) weight_sum += std::exp(l - p.m) / p.s;
    check.record(cs, std::max(std::abs(p.s - direct) / direct, std::abs(weight_sum - 1.0)));
  }
  return check.result();
}

std::vector<ChunkIndexEntry> RandomIndex(SplitMix64& rng, std::size_t chunks, std::size_t d) {
  std::vector<ChunkIndexEntry> index;
  const Matrix emb = gen_synthetic(rng.next(), chunks, d).first;
  for (std::size_t c = 0; c < chunks; ++c) {
    ChunkIndexEntry e{c, {emb.row(c).begin(), emb.row(c).end()}};
    // Duplicate an earlier embedding now and then to exercise the tie-break.
    if (c > 0 && rng.uniform_int(0, 3) == 0) e.embedding = index[rng.uniform_int(0, c - 1)].embedding;
    index.push_back(std::move(e));
  }
  return index;
}

PropertyResult TopKOracle(const VerifyOptions& opt) {
  Check check("top-k oracle", 0.0);
  SplitMix64 stream = PropertyStream(opt.seed, 6);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t chunks = rng.uniform_int(1, 64);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const auto index = RandomIndex(rng, chunks, d);
    const Matrix q = RandomQueries(rng, 1, d);
    const std::size_t k = rng.uniform_int(1, chunks + 2);
    const auto decision = route(q.row(0), index, k);

    // Exhaustive oracle: score everything, sort fully, take the prefix.
    std::vector<std::pair<double, std::uint64_t>> all;
    for (const auto& e : index) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += q(0, j) * e.embedding[j];
      all.emplace_back(s, e.chunk_id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool equal = decision.selected.size() == std::min(k, chunks);
    for (std::size_t r = 0; equal && r < decision.selected.size(); ++r) {
      equal = decision.selected[r] == all[r].second && decision.scores[r] == all[r].first;
    }
    check.record_exact(cs, equal);
  }
  return check.result();
}

PropertyResult ArgmaxStability(const VerifyOptions& opt) {
  Check check("argmax stability", 0.0);
  SplitMix64 stream = PropertyStream(opt.seed, 7);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t chunks = rng.uniform_int(1, 64);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const auto index = RandomIndex(rng, chunks, d);
    const Matrix q = RandomQueries(rng, 1, d);
    const std::size_t k = rng.uniform_int(1, chunks);
    // Powers of two scale every score exactly, so the order is preserved bit for bit.
    const double factor = std::ldexp(1.0, static_cast<int>(rng.uniform_int(0, 20)) - 10);
    std::vector<double> scaled(q.row(0).begin(), q.row(0).end());
    for (auto& x : scaled) x *= factor;
    check.record_exact(cs, route(q.row(0), index, k).selected == route(scaled, index, k).selected);
  }
  return check.result();
}

PropertyResult MonotonePruning(const VerifyOptions& opt) {
  Check check("monotone pruning", 0.0);
  SplitMix64 stream = PropertyStream(opt.seed, 8);
  for (std::size_t i = 0; i < opt.cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t chunks = rng.uniform_int(2, 64);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, kVerifyMaxHeadDim);
    const auto index = RandomIndex(rng, chunks, d);
    const Matrix q = RandomQueries(rng, 1, d);
    const std::size_t k = rng.uniform_int(1, chunks - 1);
    const auto small = route(q.row(0), index, k).selected;
    const auto large = route(q.row(0), index, k + 1).selected;
    check.record_exact(cs, std::equal(small.begin(), small.end(), large.begin()));
  }
  return check.result();
}

struct DeskPipeline {
  Matrix queries;
  std::vector<UniqueStore> unique;
  std::vector<KVChunk> chunks;
};

DeskPipeline RandomPipeline(SplitMix64& rng, std::size_t max_queries, std::size_t d) {
  DeskPipeline p;
  const std::size_t n = rng.uniform_int(1, max_queries);
  const std::size_t chunk_len = rng.uniform_int(1, 64);
  const std::size_t num_chunks = rng.uniform_int(1, kVerifyMaxChunks);
  p.queries = RandomQueries(rng, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto [k, v] = gen_synthetic(rng.next(), rng.uniform_int(0, 64), d);
    p.unique.push_back({std::move(k), std::move(v)});
  }
  auto [keys, values] = gen_synthetic(rng.next(), chunk_len * num_chunks, d);
  p.chunks = make_chunks(keys, values, chunk_len);
  return p;
}

Matrix ConcatChunks(const Matrix& head, const std::vector<KVChunk>& chunks,
                    const std::vector<std::uint64_t>& ids, bool values) {
  Matrix out = head;
  for (auto id : ids) out = Matrix::vstack(out, values ? chunks[id].values : chunks[id].keys);
  return out;
}

PropertyResult RoutingCoverage(const VerifyOptions& opt, std::size_t cases) {
  Check check("routing coverage", 0.0);
  SplitMix64 stream = PropertyStream(opt.seed, 9);
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, 64);
    const auto p = RandomPipeline(rng, 16, d);
    const ChunkRouter router(p.chunks, p.chunks.size());
    const auto routed =
        decode_step(p.queries, p.unique, p.chunks, &router, BuiltinPolicy("MoSKA"));
    const auto plain =
        decode_step(p.queries, p.unique, p.chunks, nullptr, BuiltinPolicy("ChunkAttention"));
    check.record_exact(cs, routed.outputs == plain.outputs);
  }
  return check.result();
}

PropertyResult DecodeEquivalence(const VerifyOptions& opt, std::size_t cases) {
  Check check("decode equivalence", kChunkingTolerance);
  SplitMix64 stream = PropertyStream(opt.seed, 10);
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t cs = stream.next();
    SplitMix64 rng(cs);
    const std::size_t d = rng.uniform_int(kVerifyMinHeadDim, 64);
    const auto p = RandomPipeline(rng, 16, d);
    const std::size_t k = rng.uniform_int(1, p.chunks.size());
    const ChunkRouter router(p.chunks, k);
    double worst = 0.0;
    for (const char* name : {"SGLang", "ChunkAttention", "LongHeads", "MoSKA"}) {
      const PolicySpec& policy = BuiltinPolicy(name);
      const auto result = decode_step(p.queries, p.unique, p.chunks,
                                      policy.sparse_routing ? &router : nullptr, policy);
      for (std::size_t q = 0; q < p.queries.rows(); ++q) {
        std::vector<std::uint64_t> ids;
        if (policy.sparse_routing) {
          ids = result.routing[q].selected;
        } else {
          ids.resize(p.chunks.size());
          std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        }
        const Matrix keys = ConcatChunks(p.unique[q].keys, p.chunks, ids, false);
        const Matrix values = ConcatChunks(p.unique[q].values, p.chunks, ids, true);
        const auto expect = full_attention(p.queries.row(q), keys, values, DefaultScale(d));
        worst = std::max(worst, relative_error(result.outputs[q], expect));
      }
    }
    check.record(cs, worst);
  }
  return check.result();
}

// Routing decisions of one desk-scale decode step shaped after the config:
// 8 chunks, 16 queries, k from the configured sparsity.
std::vector<TraceRow> RoutingTrace(const ExperimentConfig& config, std::uint64_t seed) {
  const std::size_t d = std::min<std::size_t>(config.model.head_dim, kVerifyMaxHeadDim);
  const std::size_t num_chunks = kVerifyMaxChunks;
  const std::size_t chunk_len = 64;
  WorkloadSpec desk = config.workload;
  desk.chunk_size = chunk_len;
  desk.shared_len = chunk_len * num_chunks;
  const std::size_t k = derive_k(desk);

  SplitMix64 rng = PropertyStream(seed, 11);
  auto [keys, values] = gen_synthetic(rng.next(), desk.shared_len, d);
  const auto chunks = make_chunks(keys, values, chunk_len);
  const Matrix queries = RandomQueries(rng, 16, d);
  std::vector<UniqueStore> unique;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    auto [uk, uv] = gen_synthetic(rng.next(), 32, d);
    unique.push_back({std::move(uk), std::move(uv)});
  }
  const ChunkRouter router(chunks, k);
  const auto result = decode_step(queries, unique, chunks, &router, BuiltinPolicy("MoSKA"));
  std::vector<TraceRow> rows;
  for (std::size_t q = 0; q < result.routing.size(); ++q) {
    rows.push_back({q, result.routing[q].selected, result.routing[q].scores});
  }
  return rows;
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed; });
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& p : properties) {
    if (!p.passed) out.push_back(p.name);
  }
  return out;
}

VerifyReport run_verify(const ExperimentConfig& config, const VerifyOptions& options) {
  const MergeFn merge = MakeMerge(options.fault);
  const std::size_t pipeline_cases = std::max<std::size_t>(1, options.cases / 10);
  VerifyReport report;
  report.properties = {
      ChunkingInvariance(options, merge),
      BatchingInvariance(options),
      MergeAssociativity(options, merge),
      PermutationInvariance(options, merge),
      SoftmaxNormalization(options),
      TopKOracle(options),
      ArgmaxStability(options),
      MonotonePruning(options),
      RoutingCoverage(options, pipeline_cases),
      DecodeEquivalence(options, pipeline_cases),
  };
  if (options.trace) report.trace = RoutingTrace(config, options.seed);
  return report;
}

namespace {

std::string JoinIds(const std::vector<std::uint64_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::string JoinReals(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += FormatReal(xs[i]);
  }
  return s;
}

}  // namespace

std::string VerifyCsv(const RunManifest& manifest, const VerifyReport& report) {
  std::ostringstream out;
  out << manifest.header_line() << kVerifyHeader << '\n';
  for (const auto& p : report.properties) {
    out << p.name << ',' << (p.passed ? "PASS" : "FAIL") << ',' << p.cases << ','
        << FormatReal(p.max_error) << ',' << FormatReal(p.tolerance) << ',';
    if (!p.passed) out << p.failing_seed;
    out << '\n';
  }
  out << "all properties," << (report.passed() ? "PASS" : "FAIL") << ",,,,\n";
  if (!report.trace.empty()) {
    out << '\n' << kTraceHeader << '\n';
    for (const auto& t : report.trace) {
      out << t.query_id << ',' << JoinIds(t.selected) << ',' << JoinReals(t.scores) << '\n';
    }
  }
  return out.str();
}

std::string VerifyJson(const RunManifest& manifest, const VerifyReport& report) {
  using json = nlohmann::json;
  json props = json::array();
  for (const auto& p : report.properties) {
    json row = {{"property", p.name},
                {"passed", p.passed},
                {"cases", p.cases},
                {"max_error", std::strtod(FormatReal(p.max_error).c_str(), nullptr)},
                {"tolerance", p.tolerance}};
    if (!p.passed) row["failing_seed"] = p.failing_seed;
    props.push_back(row);
  }
  json trace = json::array();
  for (const auto& t : report.trace) {
    json scores = json::array();
    for (double s : t.scores) scores.push_back(std::strtod(FormatReal(s).c_str(), nullptr));
    trace.push_back({{"query_id", t.query_id}, {"selected", t.selected}, {"scores", scores}});
  }
  json doc = {{"manifest",
               {{"command", manifest.command},
                {"config_digest", manifest.config_digest},
                {"seed", manifest.seed},
                {"tool_version", manifest.tool_version},
                {"timestamp", manifest.timestamp}}},
              {"passed", report.passed()},
              {"properties", props}};
  if (!report.trace.empty()) doc["trace"] = trace;
  return doc.dump(2) + "\n";
}

}  // namespace moska
