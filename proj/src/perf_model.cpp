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

#include "moska/perf_model.hpp"

#include <algorithm>
#include <cmath>

#include "moska/error.hpp"

namespace moska {

namespace {

double D(std::uint64_t x) { return static_cast<double>(x); }

// Attention FLOPs per query token per attended KV token, all layers and
// query heads: QK^T and weighted-V, one multiply-add each per element.
double AttentionFlopsPerToken(const ModelSpec& m) {
  return 4.0 * D(m.num_layers) * D(m.num_q_heads) * D(m.head_dim);
}

double EffectiveSharedLen(const PolicySpec& policy, const WorkloadSpec& w) {
  return policy.sparse_routing ? D(w.shared_len) * (1.0 - w.sparsity) : D(w.shared_len);
}

}  // namespace

Roofline Roofline::Aggregate(const HardwareSpec& hw) {
  return {hw.aggregate_bandwidth(), hw.aggregate_peak_flops()};
}

Roofline Roofline::Nodes(const HardwareSpec& hw, std::uint64_t nodes) {
  const double gpus = D(nodes * hw.gpus_per_node);
  return {hw.mem_bandwidth_per_gpu * gpus, hw.peak_flops_per_gpu * gpus};
}

double Roofline::time(const OpStats& op) const {
  return std::max(bandwidth_time(op), compute_time(op));
}

KvFootprint per_request_kv_bytes(const PolicySpec& policy, const WorkloadSpec& w,
                                 const ModelSpec& model) {
  const double kvb = kv_bytes_per_token(model);
  KvFootprint f;
  f.unique_bytes = D(w.unique_len) * kvb;
  const double shared = D(w.shared_len) * kvb;
  if (policy.kv_reuse) {
    f.one_time_shared_bytes = shared;
  } else {
    f.shared_bytes = shared;
  }
  return f;
}

std::uint64_t max_batch(const PolicySpec& policy, const WorkloadSpec& w, const ModelSpec& model,
                        const HardwareSpec& hw) {
  const KvFootprint f = per_request_kv_bytes(policy, w, model);
  const double free_bytes = hw.aggregate_capacity() - weights_bytes(model) - f.one_time_shared_bytes;
  if (free_bytes <= 0 || f.per_request_bytes() <= 0) return 0;
  return static_cast<std::uint64_t>(std::floor(free_bytes / f.per_request_bytes()));
}

std::array<OpStats, 3> attention_costs(const PolicySpec& policy, const WorkloadSpec& w,
                                       const ModelSpec& model, std::uint64_t batch) {
  const double b = D(batch);
  const double kvb = kv_bytes_per_token(model);
  const double per_token = AttentionFlopsPerToken(model);
  const double shared_len = EffectiveSharedLen(policy, w);

  OpStats unique{OpCategory::kUniqueAttention};
  unique.bytes_read = b * D(w.unique_len) * kvb;
  unique.flops = b * D(w.unique_len) * per_token;

  OpStats shared{OpCategory::kSharedAttention};
  shared.bytes_read = shared_len * kvb * (policy.shared_batched_gemm ? 1.0 : b);
  shared.flops = b * shared_len * per_token;

  OpStats ffn{OpCategory::kWeightsFfn};
  ffn.bytes_read = weights_bytes(model);
  ffn.flops = 2.0 * D(model.param_count) * b;

  return {unique, shared, ffn};
}

StepTiming attention_times(const PolicySpec& policy, const WorkloadSpec& w,
                           const ModelSpec& model, const HardwareSpec& hw, std::uint64_t batch,
                           const ModelOptions& options) {
  if (batch < 1) Fail(ErrorKind::kInvalidArgument, "attention_times requires batch >= 1");
  const Roofline roof = Roofline::Aggregate(hw);
  StepTiming t;
  t.components = attention_costs(policy, w, model, batch);
  for (std::size_t i = 0; i < t.components.size(); ++i) {
    t.component_times[i] = roof.time(t.components[i]);
    t.latency_per_token = options.overlap == OverlapModel::kSum
                              ? t.latency_per_token + t.component_times[i]
                              : std::max(t.latency_per_token, t.component_times[i]);
  }
  return t;
}

SweepRow evaluate_point(const PolicySpec& policy, const WorkloadSpec& w, const ModelSpec& model,
                        const HardwareSpec& hw, std::uint64_t batch,
                        const ModelOptions& options) {
  SweepRow row;
  row.policy = policy.name;
  row.shared_len = w.shared_len;
  row.batch = batch;
  row.max_batch = max_batch(policy, w, model, hw);
  row.effective_batch = std::min(batch, row.max_batch);
  if (row.effective_batch == 0) return row;

  const StepTiming t = attention_times(policy, w, model, hw, row.effective_batch, options);
  row.latency_per_token = t.latency_per_token;
  row.rate_per_request = 1.0 / t.latency_per_token;
  if (options.slo_cap) row.rate_per_request = std::min(row.rate_per_request, w.target_rate);
  row.system_throughput = D(row.effective_batch) * row.rate_per_request;
  return row;
}

const SweepRow* SweepResult::summary(std::string_view policy, std::uint64_t shared_len) const {
  for (const auto& r : summaries) {
    if (r.policy == policy && r.shared_len == shared_len) return &r;
  }
  return nullptr;
}

namespace {

double Normalize(double value, double baseline) {
  return baseline > 0 ? value / baseline : 0.0;
}

}  // namespace

SweepResult throughput(const ExperimentConfig& config, const ModelOptions& options) {
  const auto& model = config.model;
  const auto& hw = config.hardware;
  const PolicySpec& baseline = BaselinePolicy();

  SweepResult result;
  for (const auto& policy : config.policies) {
    for (auto len : config.workload.sweep_shared_lens) {
      const WorkloadSpec w = config.workload.with_shared_len(len);
      for (auto b : w.batch_sizes) {
        SweepRow row = evaluate_point(policy, w, model, hw, b, options);
        const SweepRow base = evaluate_point(baseline, w, model, hw, b, options);
        row.normalized_throughput = Normalize(row.system_throughput, base.system_throughput);
        result.points.push_back(std::move(row));
      }
      SweepRow summary = evaluate_point(policy, w, model, hw, max_batch(policy, w, model, hw),
                                        options);
      const SweepRow base = evaluate_point(baseline, w, model, hw,
                                           max_batch(baseline, w, model, hw), options);
      summary.row_type = RowType::kSummary;
      summary.normalized_throughput = Normalize(summary.system_throughput, base.system_throughput);
      result.summaries.push_back(std::move(summary));
    }
  }
  return result;
}

std::string_view ToString(NodeRole role) {
  switch (role) {
    case NodeRole::kUniqueNode: return "unique_node";
    case NodeRole::kSharedNode: return "shared_node";
    case NodeRole::kMonolithic: return "monolithic";
  }
  return "unknown";
}

namespace {

NodeProfile Profile(NodeRole role, const Roofline& roof, const std::vector<OpStats>& ops,
                    double capacity_used, double capacity_total) {
  NodeProfile p;
  p.role = role;
  OpStats total;
  for (const auto& op : ops) total += op;
  p.bandwidth_time = roof.bandwidth_time(total);
  p.compute_time = roof.compute_time(total);
  const double step = std::max(p.bandwidth_time, p.compute_time);
  if (step > 0) {
    p.mfu = p.compute_time / step;
    p.bw_util = p.bandwidth_time / step;
  }
  p.capacity_used = capacity_used;
  p.capacity_total = capacity_total;
  p.feasible = capacity_used <= capacity_total;
  p.cap_util = std::min(1.0, capacity_used / capacity_total);
  return p;
}

}  // namespace

std::array<NodeProfile, 2> node_utilization(const WorkloadSpec& w, const ModelSpec& model,
                                            const HardwareSpec& hw, std::uint64_t batch,
                                            const PolicySpec& policy) {
  const auto costs = attention_costs(policy, w, model, batch);
  const KvFootprint f = per_request_kv_bytes(BuiltinPolicy("MoSKA"), w, model);
  const double per_node_capacity = hw.usable_capacity_per_gpu() * D(hw.gpus_per_node);

  NodeProfile unique = Profile(NodeRole::kUniqueNode, Roofline::Nodes(hw, hw.num_unique_nodes),
                               {costs[0], costs[2]},
                               weights_bytes(model) + D(batch) * f.unique_bytes,
                               per_node_capacity * D(hw.num_unique_nodes));
  NodeProfile shared = Profile(NodeRole::kSharedNode, Roofline::Nodes(hw, hw.num_shared_nodes),
                               {costs[1]}, f.one_time_shared_bytes,
                               per_node_capacity * D(hw.num_shared_nodes));
  return {unique, shared};
}

std::vector<UtilRow> utilization_sweep(const ExperimentConfig& config) {
  std::vector<UtilRow> unique_rows, shared_rows;
  for (auto len : config.workload.sweep_shared_lens) {
    const WorkloadSpec w = config.workload.with_shared_len(len);
    for (auto b : w.batch_sizes) {
      const auto profiles = node_utilization(w, config.model, config.hardware, b);
      unique_rows.push_back({len, b, profiles[0]});
      shared_rows.push_back({len, b, profiles[1]});
    }
  }
  unique_rows.insert(unique_rows.end(), shared_rows.begin(), shared_rows.end());
  return unique_rows;
}

std::string OptimizationFlags::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(gqa, "gqa");
  add(sparse, "sparse");
  add(quant, "quant");
  return s.empty() ? "none" : s;
}

double reduction_factor(const ModelSpec& model, const WorkloadSpec& w,
                        const OptimizationFlags& flags) {
  double r = 1.0;
  if (flags.gqa) r *= D(model.num_q_heads) / D(model.num_kv_heads);
  if (flags.sparse) r *= 1.0 / (1.0 - w.sparsity);
  if (flags.quant) r *= 2.0 / D(model.kv_bytes_per_element);
  return r;
}

std::vector<KvScalingRow> fig1_scaling(const ModelSpec& model, const WorkloadSpec& w,
                                       const OptimizationFlags& flags) {
  // FP16 multi-head reference cache.
  const double fp16_mha_per_token = 2.0 * D(model.num_layers) * D(model.num_q_heads) *
                                    D(model.head_dim) * 2.0;
  const double factor = reduction_factor(model, w, flags);
  const double ref = D(*std::min_element(w.batch_sizes.begin(), w.batch_sizes.end())) *
                     D(*std::min_element(w.sweep_shared_lens.begin(), w.sweep_shared_lens.end())) *
                     fp16_mha_per_token;

  std::vector<KvScalingRow> rows;
  for (auto b : w.batch_sizes) {
    for (auto len : w.sweep_shared_lens) {
      KvScalingRow row;
      row.flags = flags.label();
      row.batch = b;
      row.seq_len = len;
      row.kv_bytes = D(b) * D(len) * fp16_mha_per_token / factor;
      row.normalized = ref > 0 ? row.kv_bytes / ref : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<BandwidthScalingRow> bandwidth_scaling(const ModelSpec& model,
                                                   const WorkloadSpec& w) {
  const auto& replicated = BuiltinPolicy("FlashAttention");
  const auto& gemv = BuiltinPolicy("SGLang");
  const auto& gemm = BuiltinPolicy("ChunkAttention");
  std::vector<BandwidthScalingRow> rows;
  for (auto b : w.batch_sizes) {
    BandwidthScalingRow row;
    row.batch = b;
    const auto rep = per_request_kv_bytes(replicated, w, model);
    const auto shr = per_request_kv_bytes(gemv, w, model);
    row.capacity_replicated = D(b) * rep.per_request_bytes();
    row.capacity_shared = D(b) * shr.per_request_bytes() + shr.one_time_shared_bytes;
    row.bytes_replicated = attention_costs(replicated, w, model, b)[1].bytes_read;
    row.bytes_shared_gemv = attention_costs(gemv, w, model, b)[1].bytes_read;
    row.bytes_shared_gemm = attention_costs(gemm, w, model, b)[1].bytes_read;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace moska
