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

// Double-precision single-head reference attention.
//
// Chunked attention is expressed through the online-softmax partial state
//
//   m   = max_i l_i
//   s   = sum_i exp(l_i - m)
//   acc = sum_i exp(l_i - m) * v_i,        l_i = scale * <q, k_i>
//
// so that any split of a KV sequence into chunks, merged with
// merge_partials(), finalizes to the same output as monolithic softmax
// attention. batched_shared_attention() evaluates N queries against one chunk
// as two matrix-matrix products (scores = scale * Q K^T, acc = W V).

#ifndef MOSKA_ATTENTION_HPP
#define MOSKA_ATTENTION_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace moska {

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  // Rows [begin, end) as a new matrix.
  Matrix slice_rows(std::size_t begin, std::size_t end) const;
  // Vertical concatenation; column counts must agree (an empty matrix is
  // accepted regardless of its column count).
  static Matrix vstack(const Matrix& top, const Matrix& bottom);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using QueryVector = std::vector<double>;

struct KVChunk {
  std::uint64_t chunk_id = 0;
  Matrix keys;    // chunk_len x head_dim
  Matrix values;  // chunk_len x head_dim
  std::vector<double> embedding;  // see chunk_embedding()

  std::size_t length() const { return keys.rows(); }
  std::size_t head_dim() const { return keys.cols(); }
};

struct PartialAttention {
  std::vector<double> acc;
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;

  // Merge identity: s = 0, m = -inf, acc = 0.
  static PartialAttention Identity(std::size_t head_dim) {
    return PartialAttention{std::vector<double>(head_dim, 0.0),
                            -std::numeric_limits<double>::infinity(), 0.0};
  }
  bool is_identity() const { return s == 0.0; }
};

inline double DefaultScale(std::size_t head_dim) {
  return 1.0 / std::sqrt(static_cast<double>(head_dim));
}

// Single-query attention over raw KV rows. Zero rows yield the identity.
PartialAttention attend(std::span<const double> q, const Matrix& keys, const Matrix& values,
                        double scale);
PartialAttention attend_chunk(std::span<const double> q, const KVChunk& chunk, double scale);

PartialAttention merge_partials(const PartialAttention& a, const PartialAttention& b);

// acc / s. Throws kInvalidArgument for the identity (no keys were attended).
std::vector<double> finalize(const PartialAttention& p);

// Monolithic softmax(scale * q K^T) V, computed via normalized weights.
std::vector<double> full_attention(std::span<const double> q, const Matrix& keys,
                                   const Matrix& values, double scale);

// Row i of the result corresponds to attend_chunk(queries.row(i), chunk).
std::vector<PartialAttention> batched_shared_attention(const Matrix& queries,
                                                       const KVChunk& chunk, double scale);

// ---------------------------------------------------------------------------
// Deterministic synthetic data.
//
// SplitMix64: state += 0x9E3779B97F4A7C15; z = state;
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//   z ^= z >> 31.
// A draw maps to [-1, 1) as (z >> 11) * 2^-52 - 1, exactly representable.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform_pm1() { return static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0; }
  // Uniform integer in [lo, hi]; modulo bias is irrelevant at these ranges.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return lo + next() % (hi - lo + 1);
  }

 private:
  std::uint64_t state_;
};

// Keys (n_tokens x head_dim, row-major draws) followed by values from the same
// stream seeded with `seed`.
std::pair<Matrix, Matrix> gen_synthetic(std::uint64_t seed, std::size_t n_tokens,
                                        std::size_t head_dim);

// max_i |a_i - b_i| / max(max_i |b_i|, tiny): the error norm every
// equivalence tolerance in this project refers to.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace moska

#endif  // MOSKA_ATTENTION_HPP
