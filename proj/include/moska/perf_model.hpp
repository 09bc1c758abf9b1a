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

// Analytical roofline model of the decode phase.
//
// One decode step (one token for each of `batch` requests) is split into
// three components:
//
//   unique attention  bytes = B * U * kvb            flops = 4 * B * U * H
//   shared attention  bytes = Leff * kvb * (1 | B)   flops = 4 * B * Leff * H
//   weights / FFN     bytes = weight bytes           flops = 2 * P * B
//
// with kvb = KV bytes per token, H = layers * q_heads * head_dim,
// Leff = shared_len * (1 - sparsity) for routing policies (else shared_len),
// and the (1 | B) replication factor selected by whether the policy batches
// shared attention into a GEMM. Each component costs
// max(bytes / bandwidth, flops / peak); the step latency is the sum of the
// component costs (or their max under OverlapModel::kMax).
//
// Modelling assumptions: router cost, softmax FLOPs and inter-node transfer
// time are all zero.

#ifndef MOSKA_PERF_MODEL_HPP
#define MOSKA_PERF_MODEL_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "moska/config.hpp"
#include "moska/op_stats.hpp"

namespace moska {

enum class OverlapModel { kSum, kMax };

struct ModelOptions {
  bool slo_cap = true;  // cap per-request rate at workload.target_rate
  OverlapModel overlap = OverlapModel::kSum;
};

struct Roofline {
  double bandwidth = 0.0;   // bytes/s
  double peak_flops = 0.0;  // FLOP/s

  static Roofline Aggregate(const HardwareSpec& hw);
  static Roofline Nodes(const HardwareSpec& hw, std::uint64_t nodes);

  double time(const OpStats& op) const;
  double bandwidth_time(const OpStats& op) const { return op.bytes_read / bandwidth; }
  double compute_time(const OpStats& op) const { return op.flops / peak_flops; }
};

struct KvFootprint {
  double unique_bytes = 0.0;         // per request
  double shared_bytes = 0.0;         // per request if replicated, else 0
  double one_time_shared_bytes = 0.0;  // stored once system-wide (reuse policies)

  double per_request_bytes() const { return unique_bytes + shared_bytes; }
};

KvFootprint per_request_kv_bytes(const PolicySpec& policy, const WorkloadSpec& workload,
                                 const ModelSpec& model);

// Largest batch whose KV fits the pooled capacity of all nodes after weights
// and any one-time shared store. 0 means infeasible.
std::uint64_t max_batch(const PolicySpec& policy, const WorkloadSpec& workload,
                        const ModelSpec& model, const HardwareSpec& hw);

// Raw per-step operation counts, ordered unique, shared, weights/FFN.
std::array<OpStats, 3> attention_costs(const PolicySpec& policy, const WorkloadSpec& workload,
                                       const ModelSpec& model, std::uint64_t batch);

struct StepTiming {
  std::array<OpStats, 3> components;
  std::array<double, 3> component_times{};
  double latency_per_token = 0.0;
};

StepTiming attention_times(const PolicySpec& policy, const WorkloadSpec& workload,
                           const ModelSpec& model, const HardwareSpec& hw, std::uint64_t batch,
                           const ModelOptions& options = {});

enum class RowType { kPoint, kSummary };

struct SweepRow {
  RowType row_type = RowType::kPoint;
  std::string policy;
  std::uint64_t shared_len = 0;
  std::uint64_t batch = 0;            // offered batch
  std::uint64_t effective_batch = 0;  // min(batch, max_batch)
  std::uint64_t max_batch = 0;
  double latency_per_token = 0.0;     // seconds, at effective_batch
  double rate_per_request = 0.0;      // tokens/s
  double system_throughput = 0.0;     // tokens/s
  double normalized_throughput = 0.0; // vs the baseline at the same shared_len and batch
};

// A point at offered batch `batch`: the system serves min(batch, max_batch)
// requests. normalized_throughput is left 0 (filled by throughput()).
SweepRow evaluate_point(const PolicySpec& policy, const WorkloadSpec& workload,
                        const ModelSpec& model, const HardwareSpec& hw, std::uint64_t batch,
                        const ModelOptions& options = {});

struct SweepResult {
  // Sorted by (policy position in config, shared_len, batch).
  std::vector<SweepRow> points;
  // One per (policy, shared_len), evaluated at max_batch.
  std::vector<SweepRow> summaries;

  const SweepRow* summary(std::string_view policy, std::uint64_t shared_len) const;
};

// Every configured policy over workload.sweep_shared_lens x batch_sizes,
// normalized against FlashAttention at the same shared_len.
SweepResult throughput(const ExperimentConfig& config, const ModelOptions& options = {});

enum class NodeRole { kUniqueNode, kSharedNode, kMonolithic };
std::string_view ToString(NodeRole role);

struct NodeProfile {
  NodeRole role = NodeRole::kMonolithic;
  double capacity_used = 0.0;      // bytes
  double capacity_total = 0.0;     // bytes
  double bandwidth_time = 0.0;     // s per step
  double compute_time = 0.0;       // s per step
  double mfu = 0.0;
  double bw_util = 0.0;
  double cap_util = 0.0;           // clamped to 1 when infeasible
  bool feasible = true;
};

// Disaggregated layout: the unique node(s) hold weights + unique KV and run
// unique attention and the FFN; the shared node(s) hold the shared store and
// run shared attention only. `policy` supplies the batching/routing flags.
std::array<NodeProfile, 2> node_utilization(const WorkloadSpec& workload,
                                            const ModelSpec& model, const HardwareSpec& hw,
                                            std::uint64_t batch,
                                            const PolicySpec& policy = BuiltinPolicy("MoSKA"));

struct UtilRow {
  std::uint64_t shared_len = 0;
  std::uint64_t batch = 0;
  NodeProfile profile;
};

// Both roles over workload.sweep_shared_lens x batch_sizes; ordered by
// (role, shared_len, batch) with the unique node first.
std::vector<UtilRow> utilization_sweep(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// KV footprint scaling.

struct OptimizationFlags {
  bool gqa = false;
  bool sparse = false;
  bool quant = false;

  std::string label() const;  // "none" or "+"-joined names
};

struct KvScalingRow {
  std::string flags;
  std::uint64_t batch = 0;
  std::uint64_t seq_len = 0;
  double kv_bytes = 0.0;
  double normalized = 0.0;  // relative to the smallest batch and seq_len, no flags
};

// Reduction factors relative to an FP16 multi-head KV cache:
// gqa = q_heads / kv_heads, sparse = 1 / (1 - sparsity),
// quant = 2 / kv_bytes_per_element.
double reduction_factor(const ModelSpec& model, const WorkloadSpec& workload,
                        const OptimizationFlags& flags);

// Rows over workload.batch_sizes x workload.sweep_shared_lens.
std::vector<KvScalingRow> fig1_scaling(const ModelSpec& model, const WorkloadSpec& workload,
                                       const OptimizationFlags& flags);

// Capacity and per-step bandwidth requirement for the shared context as batch
// grows: replicated (no reuse), shared + per-query GEMV, shared + batched GEMM.
struct BandwidthScalingRow {
  std::uint64_t batch = 0;
  double capacity_replicated = 0.0;
  double capacity_shared = 0.0;
  double bytes_replicated = 0.0;
  double bytes_shared_gemv = 0.0;
  double bytes_shared_gemm = 0.0;
};

std::vector<BandwidthScalingRow> bandwidth_scaling(const ModelSpec& model,
                                                   const WorkloadSpec& workload);

}  // namespace moska

#endif  // MOSKA_PERF_MODEL_HPP
