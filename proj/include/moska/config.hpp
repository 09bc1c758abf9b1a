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

// Model, hardware, workload and policy specifications plus the experiment
// configuration file loader. Every default reproduces the reference setup:
// Llama 3.1 8B in FP8 on two 8-GPU H200 nodes, 64K unique tokens per request,
// 1M-16M shared tokens, 75% routing sparsity and a 35 tok/s per-request SLO.

#ifndef MOSKA_CONFIG_HPP
#define MOSKA_CONFIG_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moska {

inline constexpr std::uint64_t kKiB = 1024;
inline constexpr std::uint64_t kMiB = kKiB * 1024;
inline constexpr std::uint64_t kGiB = kMiB * 1024;
inline constexpr std::uint64_t kTiB = kGiB * 1024;

struct ModelSpec {
  std::uint64_t num_layers = 32;
  std::uint64_t num_q_heads = 32;
  std::uint64_t num_kv_heads = 8;
  std::uint64_t head_dim = 128;
  std::uint64_t param_count = 8'030'000'000;
  std::uint64_t weight_bytes_per_param = 1;
  std::uint64_t kv_bytes_per_element = 1;

  bool operator==(const ModelSpec&) const = default;
};

struct HardwareSpec {
  std::uint64_t gpus_per_node = 8;
  double mem_capacity_per_gpu = 141e9;     // bytes
  double mem_bandwidth_per_gpu = 4.8e12;   // bytes/s
  double peak_flops_per_gpu = 1979e12;     // FLOP/s (FP8, sparse-free)
  std::uint64_t num_unique_nodes = 1;
  std::uint64_t num_shared_nodes = 1;
  // Fraction of each GPU's memory withheld from KV/weights (activations,
  // fragmentation). 0 means the full capacity is usable.
  double mem_reserve_fraction = 0.0;

  std::uint64_t total_nodes() const { return num_unique_nodes + num_shared_nodes; }
  std::uint64_t total_gpus() const { return total_nodes() * gpus_per_node; }
  double usable_capacity_per_gpu() const {
    return mem_capacity_per_gpu * (1.0 - mem_reserve_fraction);
  }
  double aggregate_capacity() const { return usable_capacity_per_gpu() * total_gpus(); }
  double aggregate_bandwidth() const { return mem_bandwidth_per_gpu * total_gpus(); }
  double aggregate_peak_flops() const { return peak_flops_per_gpu * total_gpus(); }

  bool operator==(const HardwareSpec&) const = default;
};

struct WorkloadSpec {
  std::uint64_t shared_len = 16 * kMiB;
  std::vector<std::uint64_t> sweep_shared_lens = {1 * kMiB, 2 * kMiB, 4 * kMiB,
                                                  8 * kMiB, 16 * kMiB};
  std::uint64_t unique_len = 64 * kKiB;
  std::uint64_t chunk_size = 4096;
  double sparsity = 0.75;
  double target_rate = 35.0;  // tokens/s per request
  std::vector<std::uint64_t> batch_sizes = {1, 2, 4, 8, 16, 32, 64, 128, 256};

  // Copy of this workload evaluated at a different shared length.
  WorkloadSpec with_shared_len(std::uint64_t len) const {
    WorkloadSpec w = *this;
    w.shared_len = len;
    return w;
  }
  std::uint64_t num_chunks() const { return shared_len / chunk_size; }

  bool operator==(const WorkloadSpec&) const = default;
};

struct PolicySpec {
  std::string name;
  bool kv_reuse = false;
  bool shared_batched_gemm = false;
  bool sparse_routing = false;

  bool operator==(const PolicySpec&) const = default;
};

// The five comparison systems, flag-for-flag.
const std::vector<PolicySpec>& BuiltinPolicies();
const PolicySpec& BuiltinPolicy(std::string_view name);
const PolicySpec& BaselinePolicy();  // FlashAttention

struct ExperimentConfig {
  ModelSpec model;
  HardwareSpec hardware;
  WorkloadSpec workload;
  std::vector<PolicySpec> policies = BuiltinPolicies();

  bool operator==(const ExperimentConfig&) const = default;
};

// Throw Error(kConfig, ...) naming the violated invariant.
void Validate(const ModelSpec& model);
void Validate(const HardwareSpec& hw);
void Validate(const WorkloadSpec& workload);
void Validate(const PolicySpec& policy);
void Validate(const ExperimentConfig& config);

double kv_bytes_per_token(const ModelSpec& model);
double weights_bytes(const ModelSpec& model);

// Number of shared chunks each query attends to when routing is enabled:
// ceil((1 - sparsity) * shared_len / chunk_size), at least 1.
std::uint64_t derive_k(const WorkloadSpec& workload);

// Parses "141GB", "64K", "4096" style quantities. Byte suffixes (KB/MB/GB/TB)
// and count suffixes (K/M/G) are powers of 1024.
double ParseByteQuantity(std::string_view text);
std::uint64_t ParseCountQuantity(std::string_view text);

// JSON text <-> config. An empty (or whitespace-only) document yields the
// defaults. Unknown keys are rejected.
ExperimentConfig ParseConfig(std::string_view text);
std::string SerializeConfig(const ExperimentConfig& config);
ExperimentConfig LoadConfig(const std::string& path);

}  // namespace moska

#endif  // MOSKA_CONFIG_HPP
