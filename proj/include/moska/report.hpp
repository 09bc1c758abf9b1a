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

// Report serialization. Every report starts with one manifest line
//
//   # moska <command> config_digest=<16 hex> seed=<u64> tool_version=<v> timestamp=<iso8601>
//
// followed by the data section: RFC-4180 CSV with LF line endings and reals
// printed with 6 significant digits ("%.6g"). The data section is a pure
// function of (config, seed, tool version); only the manifest line carries
// the timestamp. JSON mirrors carry the manifest as an object and round reals
// to the same 6 significant digits.

#ifndef MOSKA_REPORT_HPP
#define MOSKA_REPORT_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "moska/config.hpp"
#include "moska/perf_model.hpp"

namespace moska {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version{kToolVersion};
  std::string timestamp;

  std::string header_line() const;  // with trailing '\n'
};

// FNV-1a 64 over the canonical serialized config, as 16 lowercase hex digits.
std::string ConfigDigest(const ExperimentConfig& config);

// Empty `timestamp` means the current UTC time.
RunManifest MakeManifest(std::string command, const ExperimentConfig& config, std::uint64_t seed,
                         std::string timestamp = {});

std::string UtcTimestampNow();
std::string FormatReal(double value);  // "%.6g"
// Quotes a CSV field when it holds a comma, quote or line break.
std::string CsvField(std::string_view text);

// Drops '#' lines, leaving the deterministic data section.
std::string DataSection(std::string_view report);

// Column orders (pinned by golden tests):
inline constexpr std::string_view kSweepHeader =
    "row_type,policy,shared_len,batch,effective_batch,max_batch,latency_per_token,"
    "rate_per_request,system_throughput,normalized_throughput";
inline constexpr std::string_view kUtilHeader =
    "node_role,shared_len,batch,mfu,bw_util,cap_util,feasible,compute_time,bandwidth_time,"
    "capacity_used";
inline constexpr std::string_view kKvScalingHeader = "flags,batch,seq_len,kv_bytes,normalized";
inline constexpr std::string_view kBandwidthScalingHeader =
    "batch,capacity_replicated,capacity_shared,bytes_replicated,bytes_shared_gemv,"
    "bytes_shared_gemm";

// Summary rows follow the points of their (policy, shared_len) group.
std::string SweepCsv(const RunManifest& manifest, const SweepResult& sweep);
std::string SweepJson(const RunManifest& manifest, const SweepResult& sweep);

std::string UtilCsv(const RunManifest& manifest, const std::vector<UtilRow>& rows);
std::string UtilJson(const RunManifest& manifest, const std::vector<UtilRow>& rows);

// The cumulative flag sets none, gqa, gqa+sparse, gqa+sparse+quant.
std::vector<OptimizationFlags> CumulativeFlagSets();
std::string KvScalingCsv(const RunManifest& manifest, const std::vector<KvScalingRow>& rows);
std::string BandwidthScalingCsv(const RunManifest& manifest,
                                const std::vector<BandwidthScalingRow>& rows);

// MoSKA / FlashAttention summary ratio, maximized over the swept lengths.
struct PeakRatio {
  double ratio = 0.0;
  std::uint64_t shared_len = 0;
};
PeakRatio PeakNormalizedThroughput(const SweepResult& sweep, std::string_view policy = "MoSKA");

inline constexpr double kReportedPeakRatio = 538.7;

}  // namespace moska

#endif  // MOSKA_REPORT_HPP
