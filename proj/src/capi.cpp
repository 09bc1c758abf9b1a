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

#include "moska/moska.h"

#include <algorithm>
#include <new>
#include <string>

#include "moska/attention.hpp"
#include "moska/config.hpp"
#include "moska/error.hpp"
#include "moska/perf_model.hpp"
#include "moska/report.hpp"
#include "moska/router.hpp"
#include "moska/verify.hpp"

struct moska_config {
  moska::ExperimentConfig value;
};

struct moska_buffer {
  std::string text;
};

namespace {

thread_local std::string g_last_error;

moska_status ToStatus(moska::ErrorKind kind) {
  switch (kind) {
    case moska::ErrorKind::kInvalidArgument: return MOSKA_ERR_INVALID_ARGUMENT;
    case moska::ErrorKind::kDimensionMismatch: return MOSKA_ERR_DIMENSION;
    case moska::ErrorKind::kConfig: return MOSKA_ERR_CONFIG;
    case moska::ErrorKind::kIo: return MOSKA_ERR_IO;
    case moska::ErrorKind::kPolicyMismatch: return MOSKA_ERR_POLICY;
  }
  return MOSKA_ERR_INTERNAL;
}

template <typename Fn>
moska_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const moska::Error& e) {
    g_last_error = e.what();
    return ToStatus(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return MOSKA_ERR_INTERNAL;
}

void Require(bool ok, const char* what) {
  if (!ok) moska::Fail(moska::ErrorKind::kInvalidArgument, what);
}

moska_run_options Resolve(const moska_run_options* options) {
  moska_run_options o;
  moska_run_options_init(&o);
  return options ? *options : o;
}

moska::ModelOptions ToModelOptions(const moska_run_options& o) {
  moska::ModelOptions m;
  m.slo_cap = o.slo_cap != 0;
  m.overlap = o.overlap == MOSKA_OVERLAP_MAX ? moska::OverlapModel::kMax
                                             : moska::OverlapModel::kSum;
  return m;
}

moska::RunManifest Manifest(const char* command, const moska::ExperimentConfig& config,
                            const moska_run_options& o) {
  return moska::MakeManifest(command, config, o.seed, o.timestamp ? o.timestamp : "");
}

moska_buffer* NewBuffer(std::string text) { return new moska_buffer{std::move(text)}; }

}  // namespace

extern "C" {

const char* moska_version(void) { return moska::kToolVersion.data(); }

const char* moska_last_error(void) { return g_last_error.c_str(); }

const char* moska_status_string(moska_status status) {
  switch (status) {
    case MOSKA_OK: return "ok";
    case MOSKA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MOSKA_ERR_DIMENSION: return "dimension mismatch";
    case MOSKA_ERR_CONFIG: return "configuration error";
    case MOSKA_ERR_IO: return "i/o error";
    case MOSKA_ERR_POLICY: return "policy/router mismatch";
    case MOSKA_ERR_PROPERTY_FAILED: return "property violated";
    case MOSKA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void moska_run_options_init(moska_run_options* options) {
  if (!options) return;
  *options = moska_run_options{};
  options->format = MOSKA_FORMAT_CSV;
  options->slo_cap = 1;
  options->overlap = MOSKA_OVERLAP_SUM;
  options->fault = MOSKA_FAULT_NONE;
}

const char* moska_buffer_data(const moska_buffer* buffer) {
  return buffer ? buffer->text.c_str() : "";
}

size_t moska_buffer_size(const moska_buffer* buffer) { return buffer ? buffer->text.size() : 0; }

void moska_buffer_free(moska_buffer* buffer) { delete buffer; }

moska_status moska_config_default(moska_config** out) {
  return Guard([&] {
    Require(out != nullptr, "out is NULL");
    *out = new moska_config{};
    return MOSKA_OK;
  });
}

moska_status moska_config_load(const char* path, moska_config** out) {
  return Guard([&] {
    Require(path != nullptr && out != nullptr, "path or out is NULL");
    *out = new moska_config{moska::LoadConfig(path)};
    return MOSKA_OK;
  });
}

moska_status moska_config_parse(const char* text, size_t length, moska_config** out) {
  return Guard([&] {
    Require(out != nullptr && (text != nullptr || length == 0), "text or out is NULL");
    *out = new moska_config{moska::ParseConfig(std::string_view(text ? text : "", length))};
    return MOSKA_OK;
  });
}

moska_status moska_config_serialize(const moska_config* config, moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    *out = NewBuffer(moska::SerializeConfig(config->value));
    return MOSKA_OK;
  });
}

moska_status moska_config_digest(const moska_config* config, moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    *out = NewBuffer(moska::ConfigDigest(config->value));
    return MOSKA_OK;
  });
}

void moska_config_free(moska_config* config) { delete config; }

moska_status moska_kv_bytes_per_token(const moska_config* config, double* out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    *out = moska::kv_bytes_per_token(config->value.model);
    return MOSKA_OK;
  });
}

moska_status moska_derive_k(const moska_config* config, uint64_t* out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    *out = moska::derive_k(config->value.workload);
    return MOSKA_OK;
  });
}

moska_status moska_max_batch(const moska_config* config, const char* policy,
                             uint64_t shared_len, uint64_t* out) {
  return Guard([&] {
    Require(config != nullptr && policy != nullptr && out != nullptr, "NULL argument");
    const auto& c = config->value;
    auto it = std::find_if(c.policies.begin(), c.policies.end(),
                           [&](const moska::PolicySpec& p) { return p.name == policy; });
    if (it == c.policies.end()) {
      moska::Fail(moska::ErrorKind::kInvalidArgument,
                  std::string("policy '") + policy + "' is not configured");
    }
    moska::WorkloadSpec w = c.workload.with_shared_len(shared_len);
    moska::Validate(w);
    *out = moska::max_batch(*it, w, c.model, c.hardware);
    return MOSKA_OK;
  });
}

moska_status moska_run_verify(const moska_config* config, const moska_run_options* options,
                              moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    const moska_run_options o = Resolve(options);
    moska::VerifyOptions vo;
    vo.seed = o.seed;
    vo.trace = o.trace != 0;
    vo.fault = o.fault == MOSKA_FAULT_MERGE_SIGN ? moska::Fault::kMergeSign : moska::Fault::kNone;
    if (o.cases > 0) vo.cases = static_cast<std::size_t>(o.cases);
    const auto report = moska::run_verify(config->value, vo);
    const auto manifest = Manifest("verify", config->value, o);
    *out = NewBuffer(o.format == MOSKA_FORMAT_JSON ? moska::VerifyJson(manifest, report)
                                                   : moska::VerifyCsv(manifest, report));
    if (!report.passed()) {
      std::string names;
      for (const auto& n : report.failures()) names += (names.empty() ? "" : ", ") + n;
      g_last_error = "property violated: " + names + " (seed " + std::to_string(o.seed) + ")";
      return MOSKA_ERR_PROPERTY_FAILED;
    }
    return MOSKA_OK;
  });
}

moska_status moska_run_sweep(const moska_config* config, const moska_run_options* options,
                             moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    const moska_run_options o = Resolve(options);
    const auto sweep = moska::throughput(config->value, ToModelOptions(o));
    const auto manifest = Manifest("sweep", config->value, o);
    *out = NewBuffer(o.format == MOSKA_FORMAT_JSON ? moska::SweepJson(manifest, sweep)
                                                   : moska::SweepCsv(manifest, sweep));
    return MOSKA_OK;
  });
}

moska_status moska_run_util(const moska_config* config, const moska_run_options* options,
                            moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    const moska_run_options o = Resolve(options);
    const auto rows = moska::utilization_sweep(config->value);
    const auto manifest = Manifest("util", config->value, o);
    *out = NewBuffer(o.format == MOSKA_FORMAT_JSON ? moska::UtilJson(manifest, rows)
                                                   : moska::UtilCsv(manifest, rows));
    return MOSKA_OK;
  });
}

moska_status moska_run_scaling(const moska_config* config, const moska_run_options* options,
                               int kind, moska_buffer** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "config or out is NULL");
    Require(kind == MOSKA_SCALING_KV || kind == MOSKA_SCALING_BANDWIDTH, "unknown scaling kind");
    const moska_run_options o = Resolve(options);
    const auto& c = config->value;
    const auto manifest = Manifest("scaling", c, o);
    if (kind == MOSKA_SCALING_KV) {
      std::vector<moska::KvScalingRow> rows;
      for (const auto& flags : moska::CumulativeFlagSets()) {
        auto part = moska::fig1_scaling(c.model, c.workload, flags);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      *out = NewBuffer(moska::KvScalingCsv(manifest, rows));
    } else {
      *out = NewBuffer(
          moska::BandwidthScalingCsv(manifest, moska::bandwidth_scaling(c.model, c.workload)));
    }
    return MOSKA_OK;
  });
}

moska_status moska_sweep_peak_ratio(const moska_config* config, const moska_run_options* options,
                                    double* ratio, uint64_t* shared_len) {
  return Guard([&] {
    Require(config != nullptr && ratio != nullptr, "config or ratio is NULL");
    const moska_run_options o = Resolve(options);
    const auto peak =
        moska::PeakNormalizedThroughput(moska::throughput(config->value, ToModelOptions(o)));
    *ratio = peak.ratio;
    if (shared_len) *shared_len = peak.shared_len;
    return MOSKA_OK;
  });
}

moska_status moska_gen_synthetic(uint64_t seed, size_t n_tokens, size_t head_dim, double* keys,
                                 double* values) {
  return Guard([&] {
    Require(n_tokens == 0 || (keys != nullptr && values != nullptr), "NULL output");
    auto [k, v] = moska::gen_synthetic(seed, n_tokens, head_dim);
    std::copy(k.data().begin(), k.data().end(), keys);
    std::copy(v.data().begin(), v.data().end(), values);
    return MOSKA_OK;
  });
}

namespace {

moska::Matrix Wrap(const double* data, size_t rows, size_t cols) {
  if (rows * cols == 0) return moska::Matrix(rows, cols);
  return moska::Matrix(rows, cols, std::vector<double>(data, data + rows * cols));
}

double ScaleOrDefault(double scale, size_t head_dim) {
  return scale > 0 ? scale : moska::DefaultScale(head_dim);
}

}  // namespace

moska_status moska_full_attention(const double* q, const double* keys, const double* values,
                                  size_t n_tokens, size_t head_dim, double scale, double* out) {
  return Guard([&] {
    Require(q && keys && values && out, "NULL argument");
    Require(head_dim > 0, "head_dim must be > 0");
    const auto result = moska::full_attention(std::span(q, head_dim), Wrap(keys, n_tokens, head_dim),
                                              Wrap(values, n_tokens, head_dim),
                                              ScaleOrDefault(scale, head_dim));
    std::copy(result.begin(), result.end(), out);
    return MOSKA_OK;
  });
}

moska_status moska_chunked_attention(const double* q, const double* keys, const double* values,
                                     size_t head_dim, const size_t* chunk_lengths,
                                     size_t n_chunks, double scale, double* out) {
  return Guard([&] {
    Require(q && out && (n_chunks == 0 || chunk_lengths), "NULL argument");
    Require(head_dim > 0, "head_dim must be > 0");
    const double s = ScaleOrDefault(scale, head_dim);
    auto acc = moska::PartialAttention::Identity(head_dim);
    size_t offset = 0;
    for (size_t c = 0; c < n_chunks; ++c) {
      const size_t len = chunk_lengths[c];
      Require(len == 0 || (keys && values), "NULL keys or values");
      const auto part = moska::attend(std::span(q, head_dim),
                                      Wrap(keys + offset * head_dim, len, head_dim),
                                      Wrap(values + offset * head_dim, len, head_dim), s);
      acc = moska::merge_partials(acc, part);
      offset += len;
    }
    const auto result = moska::finalize(acc);
    std::copy(result.begin(), result.end(), out);
    return MOSKA_OK;
  });
}

moska_status moska_batched_shared_attention(const double* queries, size_t n_queries,
                                            const double* keys, const double* values,
                                            size_t n_tokens, size_t head_dim, double scale,
                                            double* out) {
  return Guard([&] {
    Require(queries && keys && values && out, "NULL argument");
    Require(head_dim > 0, "head_dim must be > 0");
    moska::KVChunk chunk{0, Wrap(keys, n_tokens, head_dim), Wrap(values, n_tokens, head_dim), {}};
    const auto partials = moska::batched_shared_attention(Wrap(queries, n_queries, head_dim), chunk,
                                                          ScaleOrDefault(scale, head_dim));
    for (size_t i = 0; i < partials.size(); ++i) {
      const auto row = moska::finalize(partials[i]);
      std::copy(row.begin(), row.end(), out + i * head_dim);
    }
    return MOSKA_OK;
  });
}

moska_status moska_route(const double* q, const double* embeddings, size_t n_chunks,
                         size_t head_dim, size_t k, uint64_t* selected, double* scores,
                         size_t* n_selected) {
  return Guard([&] {
    Require(q && (n_chunks == 0 || embeddings) && selected && scores && n_selected,
            "NULL argument");
    std::vector<moska::ChunkIndexEntry> index;
    for (size_t c = 0; c < n_chunks; ++c) {
      index.push_back({c, std::vector<double>(embeddings + c * head_dim,
                                              embeddings + (c + 1) * head_dim)});
    }
    const auto decision = moska::route(std::span(q, head_dim), index, k);
    std::copy(decision.selected.begin(), decision.selected.end(), selected);
    std::copy(decision.scores.begin(), decision.scores.end(), scores);
    *n_selected = decision.selected.size();
    return MOSKA_OK;
  });
}

}  // extern "C"
