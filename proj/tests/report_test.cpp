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
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "moska/config.hpp"
#include "moska/report.hpp"
#include "moska/verify.hpp"

using namespace moska;

namespace {

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t Count(const std::string& s, char c) { return std::count(s.begin(), s.end(), c); }

}  // namespace

TEST_CASE("manifest line") {
  const ExperimentConfig cfg;
  const RunManifest m = MakeManifest("sweep", cfg, 7, "2026-01-01T00:00:00Z");
  CHECK(m.config_digest.size() == 16);
  CHECK(m.header_line() == "# moska sweep config_digest=" + m.config_digest +
                               " seed=7 tool_version=0.1.0 timestamp=2026-01-01T00:00:00Z\n");
  CHECK(MakeManifest("sweep", cfg, 7).timestamp.size() == 20);

  ExperimentConfig other = cfg;
  other.workload.sparsity = 0.5;
  CHECK(ConfigDigest(other) != ConfigDigest(cfg));
  CHECK(ConfigDigest(ParseConfig(SerializeConfig(other))) == ConfigDigest(other));
}

TEST_CASE("FormatReal, CsvField and DataSection") {
  CHECK(FormatReal(0.1) == "0.1");
  CHECK(FormatReal(114.5678) == "114.568");
  CHECK(FormatReal(1.5e-7) == "1.5e-07");
  CHECK(FormatReal(0.0) == "0");
  CHECK(CsvField("MoSKA") == "MoSKA");
  CHECK(CsvField("a,b") == "\"a,b\"");
  CHECK(CsvField("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(DataSection("# one\na,b\n# two\n1,2\n") == "a,b\n1,2\n");
  CHECK(DataSection("x\n\ny\n") == "x\n\ny\n");
}

TEST_CASE("sweep CSV layout") {
  ExperimentConfig cfg;
  cfg.policies = {BuiltinPolicy("MoSKA")};
  cfg.workload.sweep_shared_lens = {16u << 20};
  cfg.workload.batch_sizes = {1, 256};
  const auto csv = SweepCsv(MakeManifest("sweep", cfg, 0, "t"), throughput(cfg));
  const auto lines = Lines(csv);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].rfind("# moska sweep ", 0) == 0);
  CHECK(lines[1] == kSweepHeader);
  CHECK(lines[2].rfind("point,MoSKA,16777216,1,1,267,", 0) == 0);
  CHECK(lines[3].rfind("point,MoSKA,16777216,256,256,267,", 0) == 0);
  CHECK(lines[4].rfind("summary,MoSKA,16777216,267,267,267,", 0) == 0);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(Count(lines[i], ',') == 9);

  // Policy names with commas stay one field.
  cfg.policies = {{"odd, name", true, false, false}};
  const auto quoted = Lines(SweepCsv(MakeManifest("sweep", cfg, 0, "t"), throughput(cfg)));
  CHECK(quoted[2].rfind("point,\"odd, name\",", 0) == 0);
}

TEST_CASE("sweep JSON mirrors the CSV") {
  ExperimentConfig cfg;
  const auto sweep = throughput(cfg);
  const auto doc = nlohmann::json::parse(SweepJson(MakeManifest("sweep", cfg, 3, "t"), sweep));
  CHECK(doc["manifest"]["seed"] == 3);
  CHECK(doc["rows"].size() == sweep.points.size() + sweep.summaries.size());
  CHECK(doc["peak_normalized_throughput"]["reported_ratio"] == 538.7);
  CHECK(doc["peak_normalized_throughput"]["shared_len"] == 16u << 20);
  CHECK(doc["peak_normalized_throughput"]["ratio"].get<double>() > 100.0);
}

TEST_CASE("util CSV layout") {
  ExperimentConfig cfg;
  cfg.workload.sweep_shared_lens = {16u << 20};
  cfg.workload.batch_sizes = {1, 256, 100000};
  const auto lines = Lines(UtilCsv(MakeManifest("util", cfg, 0, "t"), utilization_sweep(cfg)));
  REQUIRE(lines.size() == 2 + 6);
  CHECK(lines[1] == kUtilHeader);
  CHECK(lines[2].rfind("unique_node,16777216,1,", 0) == 0);
  CHECK(lines[4].find(",false,") != std::string::npos);  // batch 100000 overflows
  CHECK(lines[5].rfind("shared_node,16777216,1,", 0) == 0);
  CHECK(lines[6].rfind("shared_node,16777216,256,1,", 0) == 0);
  const auto doc =
      nlohmann::json::parse(UtilJson(MakeManifest("util", cfg, 0, "t"), utilization_sweep(cfg)));
  CHECK(doc["rows"].size() == 6);
  CHECK(doc["rows"][2]["feasible"] == false);
}

TEST_CASE("scaling CSVs") {
  const ExperimentConfig cfg;
  const auto kv = Lines(KvScalingCsv(MakeManifest("scaling", cfg, 0, "t"),
                                     fig1_scaling(cfg.model, cfg.workload, {})));
  CHECK(kv[1] == kKvScalingHeader);
  CHECK(kv[2] == "none,1,1048576,5.49756e+11,1");
  const auto bw = Lines(BandwidthScalingCsv(MakeManifest("scaling", cfg, 0, "t"),
                                            bandwidth_scaling(cfg.model, cfg.workload)));
  CHECK(bw[1] == kBandwidthScalingHeader);
  CHECK(bw.size() == 2 + cfg.workload.batch_sizes.size());
  CHECK(CumulativeFlagSets().size() == 4);
}

TEST_CASE("verify report") {
  const ExperimentConfig cfg;
  VerifyOptions opts;
  opts.cases = 50;
  opts.trace = true;
  const auto report = run_verify(cfg, opts);
  CHECK(report.passed());
  CHECK(report.failures().empty());
  CHECK(report.properties.size() == 10);
  CHECK(report.trace.size() == 16);
  for (const auto& t : report.trace) CHECK(t.selected.size() == 2);  // ceil(0.25 * 8)

  const auto csv = VerifyCsv(MakeManifest("verify", cfg, 0, "t"), report);
  const auto lines = Lines(csv);
  CHECK(lines[1] == kVerifyHeader);
  CHECK(lines[2].rfind("chunking invariance,PASS,50,", 0) == 0);
  CHECK(lines[12] == "all properties,PASS,,,,");
  CHECK(lines[13].empty());
  CHECK(lines[14] == kTraceHeader);
  CHECK(csv == VerifyCsv(MakeManifest("verify", cfg, 0, "t"), run_verify(cfg, opts)));

  opts.fault = Fault::kMergeSign;
  opts.trace = false;
  const auto broken = run_verify(cfg, opts);
  CHECK_FALSE(broken.passed());
  const auto names = broken.failures();
  CHECK(std::find(names.begin(), names.end(), "chunking invariance") != names.end());
}
