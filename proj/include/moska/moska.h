/*
 * Copyright 2026 The moska-ref Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C API of libmoska.
 *
 * Conventions:
 *  - Every fallible call returns a moska_status. On failure a message is
 *    available from moska_last_error() until the next call on the same thread.
 *  - Objects are opaque handles created by the default, load, parse and run
 *    calls and released with the matching free function. Passing NULL to a free
 *    function is a no-op.
 *  - Matrices are row-major double arrays; head_dim is the row stride.
 *  - A scale <= 0 selects 1/sqrt(head_dim).
 */

#ifndef MOSKA_MOSKA_H
#define MOSKA_MOSKA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MOSKA_BUILDING_LIBRARY)
#    define MOSKA_API __declspec(dllexport)
#  else
#    define MOSKA_API __declspec(dllimport)
#  endif
#else
#  define MOSKA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum moska_status {
  MOSKA_OK = 0,
  MOSKA_ERR_INVALID_ARGUMENT = 1,
  MOSKA_ERR_DIMENSION = 2,
  MOSKA_ERR_CONFIG = 3,
  MOSKA_ERR_IO = 4,
  MOSKA_ERR_POLICY = 5,
  /* verify: a property was violated; the report buffer is still produced. */
  MOSKA_ERR_PROPERTY_FAILED = 6,
  MOSKA_ERR_INTERNAL = 7
} moska_status;

typedef enum moska_format { MOSKA_FORMAT_CSV = 0, MOSKA_FORMAT_JSON = 1 } moska_format;
typedef enum moska_overlap { MOSKA_OVERLAP_SUM = 0, MOSKA_OVERLAP_MAX = 1 } moska_overlap;
typedef enum moska_fault { MOSKA_FAULT_NONE = 0, MOSKA_FAULT_MERGE_SIGN = 1 } moska_fault;
typedef enum moska_scaling_kind {
  MOSKA_SCALING_KV = 0,        /* normalized KV size under optimizations */
  MOSKA_SCALING_BANDWIDTH = 1  /* capacity and bandwidth vs batch */
} moska_scaling_kind;

typedef struct moska_config moska_config;
typedef struct moska_buffer moska_buffer;

typedef struct moska_run_options {
  uint64_t seed;
  int format;          /* moska_format */
  int slo_cap;         /* nonzero: cap per-request rate at the target rate */
  int overlap;         /* moska_overlap */
  int trace;           /* verify: append routing decisions */
  int fault;           /* verify: moska_fault, harness self-test */
  uint64_t cases;      /* verify: cases per randomized property, 0 = default */
  const char* timestamp; /* manifest timestamp, NULL = current UTC time */
} moska_run_options;

MOSKA_API const char* moska_version(void);
MOSKA_API const char* moska_last_error(void);
MOSKA_API const char* moska_status_string(moska_status status);

MOSKA_API void moska_run_options_init(moska_run_options* options);

/* Owned text. */
MOSKA_API const char* moska_buffer_data(const moska_buffer* buffer);
MOSKA_API size_t moska_buffer_size(const moska_buffer* buffer);
MOSKA_API void moska_buffer_free(moska_buffer* buffer);

/* Configuration. */
MOSKA_API moska_status moska_config_default(moska_config** out);
MOSKA_API moska_status moska_config_load(const char* path, moska_config** out);
MOSKA_API moska_status moska_config_parse(const char* text, size_t length, moska_config** out);
MOSKA_API moska_status moska_config_serialize(const moska_config* config, moska_buffer** out);
MOSKA_API moska_status moska_config_digest(const moska_config* config, moska_buffer** out);
MOSKA_API void moska_config_free(moska_config* config);

MOSKA_API moska_status moska_kv_bytes_per_token(const moska_config* config, double* out);
MOSKA_API moska_status moska_derive_k(const moska_config* config, uint64_t* out);
/* Capacity-limited batch of a configured policy at `shared_len`. */
MOSKA_API moska_status moska_max_batch(const moska_config* config, const char* policy,
                                       uint64_t shared_len, uint64_t* out);

/* Reports. The returned buffer holds the manifest line plus data section. */
MOSKA_API moska_status moska_run_verify(const moska_config* config,
                                        const moska_run_options* options, moska_buffer** out);
MOSKA_API moska_status moska_run_sweep(const moska_config* config,
                                       const moska_run_options* options, moska_buffer** out);
MOSKA_API moska_status moska_run_util(const moska_config* config,
                                      const moska_run_options* options, moska_buffer** out);
MOSKA_API moska_status moska_run_scaling(const moska_config* config,
                                         const moska_run_options* options, int kind,
                                         moska_buffer** out);
/* Largest MoSKA/FlashAttention throughput ratio over the swept lengths. */
MOSKA_API moska_status moska_sweep_peak_ratio(const moska_config* config,
                                              const moska_run_options* options, double* ratio,
                                              uint64_t* shared_len);

/* Reference numerics. */
MOSKA_API moska_status moska_gen_synthetic(uint64_t seed, size_t n_tokens, size_t head_dim,
                                           double* keys, double* values);
MOSKA_API moska_status moska_full_attention(const double* q, const double* keys,
                                            const double* values, size_t n_tokens,
                                            size_t head_dim, double scale, double* out);
/* Attention over consecutive chunks of the given lengths, merged in order. */
MOSKA_API moska_status moska_chunked_attention(const double* q, const double* keys,
                                               const double* values, size_t head_dim,
                                               const size_t* chunk_lengths, size_t n_chunks,
                                               double scale, double* out);
/* out is n_queries x head_dim, finalized rows. */
MOSKA_API moska_status moska_batched_shared_attention(const double* queries, size_t n_queries,
                                                      const double* keys, const double* values,
                                                      size_t n_tokens, size_t head_dim,
                                                      double scale, double* out);
/* selected/scores must hold min(k, n_chunks) entries. */
MOSKA_API moska_status moska_route(const double* q, const double* embeddings, size_t n_chunks,
                                   size_t head_dim, size_t k, uint64_t* selected,
                                   double* scores, size_t* n_selected);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif /* MOSKA_MOSKA_H */
