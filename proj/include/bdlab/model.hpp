/*
 * Copyright 2026 The bdlab Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bdlab/corpus.hpp"

namespace bdlab {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 16;
  std::size_t hidden = 16;
  std::size_t num_classes = kNumClasses;
  std::size_t max_len = 32;

  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::size_t kNumTensors = 5;
inline constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
    "E", "W1", "b1", "W2", "b2"};

/// Embedding -> mean pool -> tanh layer -> 2 logits. Biases are stored as
/// single-column matrices so every tensor shares one representation.
struct ModelParams {
  Matrix embedding;  // V x d, row 0 (PAD) is zero
  Matrix w1;         // h x d
  Matrix b1;         // h x 1
  Matrix w2;         // 2 x h
  Matrix b2;         // 2 x 1

  static ModelParams zeros(const ModelConfig& config);

  /// Tensors in the fixed order E, W1, b1, W2, b2.
  std::array<const Matrix*, kNumTensors> tensors() const {
    return {&embedding, &w1, &b1, &w2, &b2};
  }
  std::array<Matrix*, kNumTensors> tensors() {
    return {&embedding, &w1, &b1, &w2, &b2};
  }

  /// Throws unless shapes match config and every entry is finite.
  void validate(const ModelConfig& config) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;
using Logits = std::array<double, kNumClasses>;

/// Uniform(-0.08, 0.08) weights, zero biases, zero PAD row.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

Logits forward(const ModelParams& params, std::span<const TokenId> token_ids);

/// Same network after the embedding lookup: mean of the given rows.
Logits forward_from_embeddings(const ModelParams& params, const Matrix& rows);

/// argmax with ties toward the lower class index.
int predict(const ModelParams& params, std::span<const TokenId> token_ids);

/// -log softmax(logits)[label], computed stably.
double cross_entropy(const Logits& logits, int label);

/// Gradient of cross-entropy at a pooled input: returns the loss and fills
/// d loss / d pooled. Shared by every path that differentiates w.r.t. the
/// pooled embedding.
double pooled_loss_and_grad(const ModelParams& params, std::span<const double> pooled,
                            int label, std::span<double> d_pooled);

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

/// Mean cross-entropy over the batch and its exact gradient w.r.t. every
/// parameter. The PAD row gradient is always zero.
LossAndGrads loss_and_grads(const ModelParams& params,
                            std::span<const Example> batch);

struct EmbedLossAndGrad {
  double loss = 0.0;
  Matrix grad;  // same shape as trigger_rows
};

/// Cross-entropy of forward_from_embeddings(clean_rows ++ trigger_rows) and
/// its gradient w.r.t. trigger_rows only.
EmbedLossAndGrad loss_and_embed_grads(const ModelParams& params,
                                      const Matrix& clean_rows,
                                      const Matrix& trigger_rows, int label);

/// Embedding rows of token_ids.
Matrix gather_rows(const ModelParams& params, std::span<const TokenId> token_ids);

// --- serialization -------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  ModelConfig config;
  ModelParams params;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Container: 8-byte magic "BDLMODEL", u32 format version, u64 header
/// length, JSON header (config, metadata, tensor manifest), then the tensors
/// as little-endian doubles in manifest order. All integers little-endian.
std::vector<std::uint8_t> serialize_model(const ModelFile& file);
ModelFile deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace bdlab
