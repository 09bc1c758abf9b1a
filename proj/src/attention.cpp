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

#include "moska/attention.hpp"

#include <algorithm>
#include <string>

#include "moska/error.hpp"

namespace moska {

namespace {

void CheckDims(bool ok, const std::string& what) {
  if (!ok) Fail(ErrorKind::kDimensionMismatch, what);
}

void CheckKV(std::span<const double> q, const Matrix& keys, const Matrix& values) {
  CheckDims(keys.rows() == values.rows(),
            "keys have " + std::to_string(keys.rows()) + " rows, values " +
                std::to_string(values.rows()));
  if (keys.rows() == 0) return;
  CheckDims(keys.cols() == q.size(), "query length " + std::to_string(q.size()) +
                                         " != key width " + std::to_string(keys.cols()));
  CheckDims(values.cols() == q.size(), "query length " + std::to_string(q.size()) +
                                           " != value width " + std::to_string(values.cols()));
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += a[j] * b[j];
  return sum;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  CheckDims(data_.size() == rows_ * cols_, "matrix data size does not match shape");
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  CheckDims(begin <= end && end <= rows_, "row slice out of range");
  return Matrix(end - begin, cols_,
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  CheckDims(top.cols() == bottom.cols(), "vstack column mismatch");
  std::vector<double> data(top.data_);
  data.insert(data.end(), bottom.data_.begin(), bottom.data_.end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

PartialAttention attend(std::span<const double> q, const Matrix& keys, const Matrix& values,
                        double scale) {
  CheckKV(q, keys, values);
  const std::size_t d = q.size();
  if (keys.rows() == 0) return PartialAttention::Identity(d);

  std::vector<double> logits(keys.rows());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    logits[i] = scale * Dot(q, keys.row(i));
    m = std::max(m, logits[i]);
  }
  PartialAttention p = PartialAttention::Identity(d);
  p.m = m;
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    const double w = std::exp(logits[i] - m);
    p.s += w;
    const auto v = values.row(i);
    for (std::size_t j = 0; j < d; ++j) p.acc[j] += w * v[j];
  }
  return p;
}

PartialAttention attend_chunk(std::span<const double> q, const KVChunk& chunk, double scale) {
  return attend(q, chunk.keys, chunk.values, scale);
}

PartialAttention merge_partials(const PartialAttention& a, const PartialAttention& b) {
  CheckDims(a.acc.size() == b.acc.size(), "partials have different head_dim");
  if (a.is_identity()) return b;
  if (b.is_identity()) return a;

  const double m = std::max(a.m, b.m);
  const double wa = std::exp(a.m - m);
  const double wb = std::exp(b.m - m);
  PartialAttention out;
  out.m = m;
  out.s = a.s * wa + b.s * wb;
  out.acc.resize(a.acc.size());
  for (std::size_t j = 0; j < a.acc.size(); ++j) out.acc[j] = a.acc[j] * wa + b.acc[j] * wb;
  return out;
}

std::vector<double> finalize(const PartialAttention& p) {
  if (p.is_identity()) Fail(ErrorKind::kInvalidArgument, "finalize of an empty partial");
  std::vector<double> out(p.acc.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = p.acc[j] / p.s;
  return out;
}

std::vector<double> full_attention(std::span<const double> q, const Matrix& keys,
                                   const Matrix& values, double scale) {
  CheckKV(q, keys, values);
  if (keys.rows() == 0) Fail(ErrorKind::kInvalidArgument, "full_attention over zero keys");

  const std::size_t n = keys.rows();
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = scale * Dot(q, keys.row(i));
  const double m = *std::max_element(weights.begin(), weights.end());
  double z = 0.0;
  for (auto& w : weights) {
    w = std::exp(w - m);
    z += w;
  }
  for (auto& w : weights) w /= z;

  std::vector<double> out(q.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = values.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[i] * v[j];
  }
  return out;
}

std::vector<PartialAttention> batched_shared_attention(const Matrix& queries,
                                                       const KVChunk& chunk, double scale) {
  if (queries.rows() == 0) Fail(ErrorKind::kInvalidArgument, "batch of zero queries");
  CheckKV(queries.row(0), chunk.keys, chunk.values);
  const std::size_t n = queries.rows();
  const std::size_t len = chunk.length();
  const std::size_t d = queries.cols();
  if (len == 0) return std::vector<PartialAttention>(n, PartialAttention::Identity(d));

  // GEMM 1: scores (n x len) = scale * Q K^T.
  Matrix scores(n, len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = queries.row(i);
    for (std::size_t l = 0; l < len; ++l) scores(i, l) = scale * Dot(q, chunk.keys.row(l));
  }

  // Row-wise shift and exponentiation; scores becomes the weight matrix W.
  std::vector<PartialAttention> out(n, PartialAttention::Identity(d));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = scores.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    out[i].m = m;
    for (auto& x : row) {
      x = std::exp(x - m);
      out[i].s += x;
    }
  }

  // GEMM 2: acc (n x d) = W V.
  for (std::size_t i = 0; i < n; ++i) {
    auto& acc = out[i].acc;
    for (std::size_t l = 0; l < len; ++l) {
      const double w = scores(i, l);
      const auto v = chunk.values.row(l);
      for (std::size_t j = 0; j < d; ++j) acc[j] += w * v[j];
    }
  }
  return out;
}

std::pair<Matrix, Matrix> gen_synthetic(std::uint64_t seed, std::size_t n_tokens,
                                        std::size_t head_dim) {
  SplitMix64 rng(seed);
  Matrix keys(n_tokens, head_dim);
  Matrix values(n_tokens, head_dim);
  for (std::size_t i = 0; i < n_tokens; ++i)
    for (std::size_t j = 0; j < head_dim; ++j) keys(i, j) = rng.uniform_pm1();
  for (std::size_t i = 0; i < n_tokens; ++i)
    for (std::size_t j = 0; j < head_dim; ++j) values(i, j) = rng.uniform_pm1();
  return {std::move(keys), std::move(values)};
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  CheckDims(a.size() == b.size(), "relative_error on vectors of different length");
  double diff = 0.0, ref = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    diff = std::max(diff, std::abs(a[j] - b[j]));
    ref = std::max(ref, std::abs(b[j]));
  }
  return diff / std::max(ref, std::numeric_limits<double>::min());
}

}  // namespace moska
