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

#include "moska/report.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <sstream>

#include "json.hpp"

namespace moska {

using json = nlohmann::json;

std::string RunManifest::header_line() const {
  return "# moska " + command + " config_digest=" + config_digest +
         " seed=" + std::to_string(seed) + " tool_version=" + tool_version +
         " timestamp=" + timestamp + "\n";
}

std::string ConfigDigest(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : SerializeConfig(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string UtcTimestampNow() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest MakeManifest(std::string command, const ExperimentConfig& config, std::uint64_t seed,
                         std::string timestamp) {
  RunManifest m;
  m.command = std::move(command);
  m.config_digest = ConfigDigest(config);
  m.seed = seed;
  m.timestamp = timestamp.empty() ? UtcTimestampNow() : std::move(timestamp);
  return m;
}

std::string FormatReal(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string CsvField(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string DataSection(std::string_view report) {
  std::string out;
  std::size_t pos = 0;
  while (pos < report.size()) {
    std::size_t end = report.find('\n', pos);
    if (end == std::string_view::npos) end = report.size();
    const auto line = report.substr(pos, end - pos);
    if (line.empty() || line.front() != '#') {
      out.append(line);
      out.push_back('\n');
    }
    pos = end + 1;
  }
  return out;
}

namespace {

// Reals in JSON go through the same 6-digit rounding as the CSV.
double Round6(double value) { return std::strtod(FormatReal(value).c_str(), nullptr); }

json ManifestJson(const RunManifest& m) {
  return {{"command", m.command},       {"config_digest", m.config_digest},
          {"seed", m.seed},             {"tool_version", m.tool_version},
          {"timestamp", m.timestamp}};
}

const char* RowTypeName(RowType t) { return t == RowType::kSummary ? "summary" : "point"; }

void AppendSweepRow(std::ostringstream& out, const SweepRow& r) {
  out << RowTypeName(r.row_type) << ',' << CsvField(r.policy) << ',' << r.shared_len << ',' << r.batch << ','
      << r.effective_batch << ',' << r.max_batch << ',' << FormatReal(r.latency_per_token) << ','
      << FormatReal(r.rate_per_request) << ',' << FormatReal(r.system_throughput) << ','
      << FormatReal(r.normalized_throughput) << '\n';
}

json SweepRowJson(const SweepRow& r) {
  return {{"row_type", RowTypeName(r.row_type)},
          {"policy", r.policy},
          {"shared_len", r.shared_len},
          {"batch", r.batch},
          {"effective_batch", r.effective_batch},
          {"max_batch", r.max_batch},
          {"latency_per_token", Round6(r.latency_per_token)},
          {"rate_per_request", Round6(r.rate_per_request)},
          {"system_throughput", Round6(r.system_throughput)},
          {"normalized_throughput", Round6(r.normalized_throughput)}};
}

// Points grouped with their summary row, in sweep order.
template <typename Fn>
void ForEachSweepRow(const SweepResult& sweep, Fn&& fn) {
  std::size_t p = 0;
  for (const auto& summary : sweep.summaries) {
    while (p < sweep.points.size() && sweep.points[p].policy == summary.policy &&
           sweep.points[p].shared_len == summary.shared_len) {
      fn(sweep.points[p++]);
    }
    fn(summary);
  }
}

}  // namespace

std::string SweepCsv(const RunManifest& manifest, const SweepResult& sweep) {
  std::ostringstream out;
  out << manifest.header_line() << kSweepHeader << '\n';
  ForEachSweepRow(sweep, [&](const SweepRow& r) { AppendSweepRow(out, r); });
  return out.str();
}

std::string SweepJson(const RunManifest& manifest, const SweepResult& sweep) {
  json rows = json::array();
  ForEachSweepRow(sweep, [&](const SweepRow& r) { rows.push_back(SweepRowJson(r)); });
  const PeakRatio peak = PeakNormalizedThroughput(sweep);
  json doc = {{"manifest", ManifestJson(manifest)},
              {"rows", rows},
              {"peak_normalized_throughput",
               {{"policy", "MoSKA"},
                {"ratio", Round6(peak.ratio)},
                {"shared_len", peak.shared_len},
                {"reported_ratio", kReportedPeakRatio}}}};
  return doc.dump(2) + "\n";
}

std::string UtilCsv(const RunManifest& manifest, const std::vector<UtilRow>& rows) {
  std::ostringstream out;
  out << manifest.header_line() << kUtilHeader << '\n';
  for (const auto& r : rows) {
    const auto& p = r.profile;
    out << ToString(p.role) << ',' << r.shared_len << ',' << r.batch << ',' << FormatReal(p.mfu)
        << ',' << FormatReal(p.bw_util) << ',' << FormatReal(p.cap_util) << ','
        << (p.feasible ? "true" : "false") << ',' << FormatReal(p.compute_time) << ','
        << FormatReal(p.bandwidth_time) << ',' << FormatReal(p.capacity_used) << '\n';
  }
  return out.str();
}

std::string UtilJson(const RunManifest& manifest, const std::vector<UtilRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    const auto& p = r.profile;
    arr.push_back({{"node_role", ToString(p.role)},
                   {"shared_len", r.shared_len},
                   {"batch", r.batch},
                   {"mfu", Round6(p.mfu)},
                   {"bw_util", Round6(p.bw_util)},
                   {"cap_util", Round6(p.cap_util)},
                   {"feasible", p.feasible},
                   {"compute_time", Round6(p.compute_time)},
                   {"bandwidth_time", Round6(p.bandwidth_time)},
                   {"capacity_used", Round6(p.capacity_used)}});
  }
  json doc = {{"manifest", ManifestJson(manifest)}, {"rows", arr}};
  return doc.dump(2) + "\n";
}

std::vector<OptimizationFlags> CumulativeFlagSets() {
  return {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
}

std::string KvScalingCsv(const RunManifest& manifest, const std::vector<KvScalingRow>& rows) {
  std::ostringstream out;
  out << manifest.header_line() << kKvScalingHeader << '\n';
  for (const auto& r : rows) {
    out << r.flags << ',' << r.batch << ',' << r.seq_len << ',' << FormatReal(r.kv_bytes) << ','
        << FormatReal(r.normalized) << '\n';
  }
  return out.str();
}

std::string BandwidthScalingCsv(const RunManifest& manifest,
                                const std::vector<BandwidthScalingRow>& rows) {
  std::ostringstream out;
  out << manifest.header_line() << kBandwidthScalingHeader << '\n';
  for (const auto& r : rows) {
    out << r.batch << ',' << FormatReal(r.capacity_replicated) << ','
        << FormatReal(r.capacity_shared) << ',' << FormatReal(r.bytes_replicated) << ','
        << FormatReal(r.bytes_shared_gemv) << ',' << FormatReal(r.bytes_shared_gemm) << '\n';
  }
  return out.str();
}

PeakRatio PeakNormalizedThroughput(const SweepResult& sweep, std::string_view policy) {
  PeakRatio peak;
  for (const auto& s : sweep.summaries) {
    if (s.policy == policy && s.normalized_throughput > peak.ratio) {
      peak.ratio = s.normalized_throughput;
      peak.shared_len = s.shared_len;
    }
  }
  return peak;
}

}  // namespace moska
