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

#include "moska/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "moska/error.hpp"

namespace moska {

using json = nlohmann::json;

const std::vector<PolicySpec>& BuiltinPolicies() {
  //                                   reuse  batched routing
  static const std::vector<PolicySpec> kPolicies = {
      {"FlashAttention", false, false, false},
      {"SGLang", true, false, false},
      {"LongHeads", false, false, true},
      {"ChunkAttention", true, true, false},
      {"MoSKA", true, true, true},
  };
  return kPolicies;
}

const PolicySpec& BuiltinPolicy(std::string_view name) {
  for (const auto& p : BuiltinPolicies()) {
    if (p.name == name) return p;
  }
  Fail(ErrorKind::kConfig, "unknown built-in policy '" + std::string(name) + "'");
}

const PolicySpec& BaselinePolicy() { return BuiltinPolicies().front(); }

namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) Fail(ErrorKind::kConfig, "invariant violated: " + what);
}

}  // namespace

void Validate(const ModelSpec& m) {
  Require(m.num_layers > 0, "model.num_layers > 0");
  Require(m.num_q_heads > 0, "model.num_q_heads > 0");
  Require(m.num_kv_heads > 0, "model.num_kv_heads > 0");
  Require(m.num_q_heads % m.num_kv_heads == 0,
          "model.num_q_heads is a multiple of model.num_kv_heads");
  Require(m.head_dim > 0, "model.head_dim > 0");
  Require(m.param_count > 0, "model.param_count > 0");
  Require(m.weight_bytes_per_param > 0, "model.weight_bytes_per_param > 0");
  Require(m.kv_bytes_per_element == 1 || m.kv_bytes_per_element == 2 ||
              m.kv_bytes_per_element == 4,
          "model.kv_bytes_per_element in {1, 2, 4}");
}

void Validate(const HardwareSpec& hw) {
  Require(hw.gpus_per_node > 0, "hardware.gpus_per_node > 0");
  Require(hw.mem_capacity_per_gpu > 0, "hardware.mem_capacity_per_gpu > 0");
  Require(hw.mem_bandwidth_per_gpu > 0, "hardware.mem_bandwidth_per_gpu > 0");
  Require(hw.peak_flops_per_gpu > 0, "hardware.peak_flops_per_gpu > 0");
  Require(hw.num_unique_nodes > 0, "hardware.num_unique_nodes > 0");
  Require(hw.num_shared_nodes > 0, "hardware.num_shared_nodes > 0");
  Require(hw.mem_reserve_fraction >= 0 && hw.mem_reserve_fraction < 1,
          "hardware.mem_reserve_fraction in [0, 1)");
}

void Validate(const WorkloadSpec& w) {
  Require(w.chunk_size > 0, "workload.chunk_size > 0");
  Require(w.unique_len > 0, "workload.unique_len > 0");
  Require(std::isfinite(w.sparsity) && w.sparsity >= 0 && w.sparsity < 1,
          "workload.sparsity in [0, 1) (top-k must be >= 1)");
  Require(std::isfinite(w.target_rate) && w.target_rate > 0,
          "workload.target_rate > 0");
  Require(w.shared_len % w.chunk_size == 0,
          "workload.shared_len is a multiple of workload.chunk_size");
  Require(!w.sweep_shared_lens.empty(), "workload.sweep_shared_lens nonempty");
  for (auto len : w.sweep_shared_lens) {
    Require(len % w.chunk_size == 0,
            "workload.sweep_shared_lens entries are multiples of workload.chunk_size");
  }
  Require(!w.batch_sizes.empty(), "workload.batch_sizes nonempty");
  for (auto b : w.batch_sizes) Require(b > 0, "workload.batch_sizes entries > 0");
}

void Validate(const PolicySpec& p) {
  Require(!p.name.empty(), "policy name nonempty");
  Require(!p.shared_batched_gemm || p.kv_reuse,
          "policy '" + p.name + "': shared_batched_gemm implies kv_reuse");
}

void Validate(const ExperimentConfig& c) {
  Validate(c.model);
  Validate(c.hardware);
  Validate(c.workload);
  Require(!c.policies.empty(), "policies nonempty");
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    Validate(c.policies[i]);
    for (std::size_t j = 0; j < i; ++j) {
      Require(c.policies[i].name != c.policies[j].name,
              "policy names unique ('" + c.policies[i].name + "')");
    }
  }
}

double kv_bytes_per_token(const ModelSpec& m) {
  return 2.0 * static_cast<double>(m.num_layers) * static_cast<double>(m.num_kv_heads) *
         static_cast<double>(m.head_dim) * static_cast<double>(m.kv_bytes_per_element);
}

double weights_bytes(const ModelSpec& m) {
  return static_cast<double>(m.param_count) * static_cast<double>(m.weight_bytes_per_param);
}

std::uint64_t derive_k(const WorkloadSpec& w) {
  const double chunks = static_cast<double>(w.shared_len) / static_cast<double>(w.chunk_size);
  // Round away representation noise before ceil: 0.25 * 4096 must be 1024.
  const double raw = (1.0 - w.sparsity) * chunks;
  const double k = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
}

// ---------------------------------------------------------------------------
// Quantity parsing

namespace {

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string Upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Splits "141.5 GB" into (141.5, "GB").
std::pair<double, std::string> SplitNumber(std::string_view text) {
  const std::string s = Trim(text);
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(s, &pos);
  } catch (const std::exception&) {
    Fail(ErrorKind::kConfig, "malformed quantity '" + s + "'");
  }
  return {value, Upper(Trim(std::string_view(s).substr(pos)))};
}

}  // namespace

double ParseByteQuantity(std::string_view text) {
  auto [value, suffix] = SplitNumber(text);
  static const std::map<std::string, double> kUnits = {
      {"", 1.0}, {"B", 1.0}, {"KB", double(kKiB)}, {"MB", double(kMiB)},
      {"GB", double(kGiB)}, {"TB", double(kTiB)}};
  auto it = kUnits.find(suffix);
  if (it == kUnits.end()) {
    Fail(ErrorKind::kConfig, "unknown byte unit '" + suffix + "' in '" + std::string(text) + "'");
  }
  return value * it->second;
}

std::uint64_t ParseCountQuantity(std::string_view text) {
  auto [value, suffix] = SplitNumber(text);
  static const std::map<std::string, double> kUnits = {
      {"", 1.0}, {"K", double(kKiB)}, {"M", double(kMiB)}, {"G", double(kGiB)}};
  auto it = kUnits.find(suffix);
  if (it == kUnits.end()) {
    Fail(ErrorKind::kConfig, "unknown count unit '" + suffix + "' in '" + std::string(text) + "'");
  }
  const double scaled = value * it->second;
  if (scaled < 0 || scaled != std::floor(scaled)) {
    Fail(ErrorKind::kConfig, "count '" + std::string(text) + "' is not a nonnegative integer");
  }
  return static_cast<std::uint64_t>(scaled);
}

// ---------------------------------------------------------------------------
// JSON schema

namespace {

[[noreturn]] void SchemaError(const std::string& key, const std::string& what) {
  Fail(ErrorKind::kConfig, "schema violation at '" + key + "': " + what);
}

std::uint64_t ReadCount(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) SchemaError(key, "must be nonnegative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d < 0 || d != std::floor(d)) SchemaError(key, "must be a nonnegative integer");
    return static_cast<std::uint64_t>(d);
  }
  if (v.is_string()) {
    try {
      return ParseCountQuantity(v.get<std::string>());
    } catch (const Error& e) {
      SchemaError(key, e.what());
    }
  }
  SchemaError(key, "expected an integer or a count string like \"64K\"");
}

double ReadBytes(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return ParseByteQuantity(v.get<std::string>());
    } catch (const Error& e) {
      SchemaError(key, e.what());
    }
  }
  SchemaError(key, "expected a number or a byte string like \"141GB\"");
}

double ReadReal(const json& v, const std::string& key) {
  if (!v.is_number()) SchemaError(key, "expected a number");
  return v.get<double>();
}

bool ReadBool(const json& v, const std::string& key) {
  if (!v.is_boolean()) SchemaError(key, "expected true or false");
  return v.get<bool>();
}

std::vector<std::uint64_t> ReadCountList(const json& v, const std::string& key) {
  if (!v.is_array()) SchemaError(key, "expected an array");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(ReadCount(v[i], key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

using FieldReader = std::function<void(const json&, const std::string&)>;

void ReadSection(const json& section, const std::string& name,
                 const std::map<std::string, FieldReader>& fields) {
  if (!section.is_object()) SchemaError(name, "expected an object");
  for (const auto& [key, value] : section.items()) {
    const std::string path = name + "." + key;
    auto it = fields.find(key);
    if (it == fields.end()) SchemaError(path, "unknown key");
    it->second(value, path);
  }
}

PolicySpec ReadPolicy(const json& v, const std::string& key) {
  if (v.is_string()) {
    try {
      return BuiltinPolicy(v.get<std::string>());
    } catch (const Error& e) {
      SchemaError(key, e.what());
    }
  }
  if (!v.is_object()) SchemaError(key, "expected a built-in policy name or an object");
  PolicySpec p;
  bool has_name = false;
  ReadSection(v, key,
              {{"name",
                [&](const json& x, const std::string& k) {
                  if (!x.is_string()) SchemaError(k, "expected a string");
                  p.name = x.get<std::string>();
                  has_name = true;
                }},
               {"kv_reuse", [&](const json& x, const std::string& k) { p.kv_reuse = ReadBool(x, k); }},
               {"shared_batched_gemm",
                [&](const json& x, const std::string& k) { p.shared_batched_gemm = ReadBool(x, k); }},
               {"sparse_routing",
                [&](const json& x, const std::string& k) { p.sparse_routing = ReadBool(x, k); }}});
  if (!has_name) SchemaError(key + ".name", "missing");
  return p;
}

}  // namespace

ExperimentConfig ParseConfig(std::string_view text) {
  ExperimentConfig cfg;
  if (Trim(text).empty()) return cfg;

  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) SchemaError("<root>", "expected an object");

  auto& m = cfg.model;
  auto& h = cfg.hardware;
  auto& w = cfg.workload;
  auto count = [](std::uint64_t& dst) {
    return [&dst](const json& v, const std::string& k) { dst = ReadCount(v, k); };
  };
  auto bytes = [](double& dst) {
    return [&dst](const json& v, const std::string& k) { dst = ReadBytes(v, k); };
  };
  auto real = [](double& dst) {
    return [&dst](const json& v, const std::string& k) { dst = ReadReal(v, k); };
  };

  for (const auto& [section, value] : root.items()) {
    if (section == "model") {
      ReadSection(value, section,
                  {{"num_layers", count(m.num_layers)},
                   {"num_q_heads", count(m.num_q_heads)},
                   {"num_kv_heads", count(m.num_kv_heads)},
                   {"head_dim", count(m.head_dim)},
                   {"param_count", count(m.param_count)},
                   {"weight_bytes_per_param", count(m.weight_bytes_per_param)},
                   {"kv_bytes_per_element", count(m.kv_bytes_per_element)}});
    } else if (section == "hardware") {
      ReadSection(value, section,
                  {{"gpus_per_node", count(h.gpus_per_node)},
                   {"mem_capacity_per_gpu", bytes(h.mem_capacity_per_gpu)},
                   {"mem_bandwidth_per_gpu", bytes(h.mem_bandwidth_per_gpu)},
                   {"peak_flops_per_gpu", real(h.peak_flops_per_gpu)},
                   {"num_unique_nodes", count(h.num_unique_nodes)},
                   {"num_shared_nodes", count(h.num_shared_nodes)},
                   {"mem_reserve_fraction", real(h.mem_reserve_fraction)}});
    } else if (section == "workload") {
      ReadSection(value, section,
                  {{"shared_len", count(w.shared_len)},
                   {"sweep_shared_lens",
                    [&](const json& v, const std::string& k) { w.sweep_shared_lens = ReadCountList(v, k); }},
                   {"unique_len", count(w.unique_len)},
                   {"chunk_size", count(w.chunk_size)},
                   {"sparsity", real(w.sparsity)},
                   {"target_rate", real(w.target_rate)},
                   {"batch_sizes",
                    [&](const json& v, const std::string& k) { w.batch_sizes = ReadCountList(v, k); }}});
    } else if (section == "policies") {
      if (!value.is_array()) SchemaError(section, "expected an array");
      cfg.policies.clear();
      for (std::size_t i = 0; i < value.size(); ++i) {
        cfg.policies.push_back(ReadPolicy(value[i], "policies[" + std::to_string(i) + "]"));
      }
    } else {
      SchemaError(section, "unknown section");
    }
  }

  Validate(cfg);
  return cfg;
}

std::string SerializeConfig(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  const auto& h = cfg.hardware;
  const auto& w = cfg.workload;
  json root;
  root["model"] = {{"num_layers", m.num_layers},
                   {"num_q_heads", m.num_q_heads},
                   {"num_kv_heads", m.num_kv_heads},
                   {"head_dim", m.head_dim},
                   {"param_count", m.param_count},
                   {"weight_bytes_per_param", m.weight_bytes_per_param},
                   {"kv_bytes_per_element", m.kv_bytes_per_element}};
  root["hardware"] = {{"gpus_per_node", h.gpus_per_node},
                      {"mem_capacity_per_gpu", h.mem_capacity_per_gpu},
                      {"mem_bandwidth_per_gpu", h.mem_bandwidth_per_gpu},
                      {"peak_flops_per_gpu", h.peak_flops_per_gpu},
                      {"num_unique_nodes", h.num_unique_nodes},
                      {"num_shared_nodes", h.num_shared_nodes},
                      {"mem_reserve_fraction", h.mem_reserve_fraction}};
  root["workload"] = {{"shared_len", w.shared_len},
                      {"sweep_shared_lens", w.sweep_shared_lens},
                      {"unique_len", w.unique_len},
                      {"chunk_size", w.chunk_size},
                      {"sparsity", w.sparsity},
                      {"target_rate", w.target_rate},
                      {"batch_sizes", w.batch_sizes}};
  json policies = json::array();
  for (const auto& p : cfg.policies) {
    policies.push_back({{"name", p.name},
                        {"kv_reuse", p.kv_reuse},
                        {"shared_batched_gemm", p.shared_batched_gemm},
                        {"sparse_routing", p.sparse_routing}});
  }
  root["policies"] = policies;
  return root.dump(2) + "\n";
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kConfig, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

}  // namespace moska
