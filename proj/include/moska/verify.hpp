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

// Desk-scale equivalence checks on synthetic data. Every case draws its shape
// and data from a per-case seed derived from the run seed, so a failure is
// reproducible from the seed printed in the report.

#ifndef MOSKA_VERIFY_HPP
#define MOSKA_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "moska/config.hpp"
#include "moska/report.hpp"

namespace moska {

// Hard caps for verify; keep a run to a few seconds.
inline constexpr std::size_t kVerifyMaxTokens = 512;
inline constexpr std::size_t kVerifyMaxChunks = 8;
inline constexpr std::size_t kVerifyMaxQueries = 64;
inline constexpr std::size_t kVerifyMinHeadDim = 4;
inline constexpr std::size_t kVerifyMaxHeadDim = 128;

inline constexpr double kChunkingTolerance = 1e-9;
inline constexpr double kExactTolerance = 1e-12;

enum class Fault {
  kNone,
  kMergeSign,  // harness self-test: subtract the second partial when merging
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::size_t cases = 1000;  // per randomized property
  bool trace = false;
  Fault fault = Fault::kNone;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::uint64_t cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::uint64_t failing_seed = 0;  // first failing case, valid when !passed
};

struct TraceRow {
  std::uint64_t query_id = 0;
  std::vector<std::uint64_t> selected;
  std::vector<double> scores;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  std::vector<TraceRow> trace;

  bool passed() const;
  std::vector<std::string> failures() const;
};

VerifyReport run_verify(const ExperimentConfig& config, const VerifyOptions& options);

inline constexpr std::string_view kVerifyHeader =
    "property,status,cases,max_error,tolerance,failing_seed";
inline constexpr std::string_view kTraceHeader = "query_id,selected_chunk_ids,scores";

// Property table, then (with tracing) a blank line and the routing trace.
std::string VerifyCsv(const RunManifest& manifest, const VerifyReport& report);
std::string VerifyJson(const RunManifest& manifest, const VerifyReport& report);

}  // namespace moska

#endif  // MOSKA_VERIFY_HPP
