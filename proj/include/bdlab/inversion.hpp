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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdlab/corpus.hpp"
#include "bdlab/model.hpp"

namespace bdlab {

/// Per-position logits over the vocabulary; the PAD column is never
/// selectable.
struct SoftTrigger {
  Matrix logits;  // L x V
  double temperature = 1.0;
};

struct InversionConfig {
  std::size_t trigger_len = 3;
  std::size_t steps = 300;
  double step_size = 0.5;
  double tau_start = 2.0;
  double tau_end = 0.05;
  std::size_t restarts = 5;
  std::size_t dev_sample = 64;
  double theta_asr = 0.8;
  double theta_loss = 1.0;
  std::size_t max_len = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static InversionConfig from_json(const nlohmann::json& j);
};

struct TargetRecord {
  int target_label = 0;
  std::vector<TokenId> best_tokens;
  double soft_loss = 0.0;
  double hard_asr = 0.0;
  double hard_loss = 0.0;
  std::size_t restart = 0;
};

struct InversionVerdict {
  std::vector<TargetRecord> per_target;
  bool backdoored = false;
  TargetRecord evidence;
};

/// Clean examples of one evaluation batch with their embedding rows cached.
/// When a trigger is appended, clean rows beyond max_len - trigger length are
/// dropped, matching insert_trigger.
struct EvalBatch {
  std::vector<Example> examples;
  std::vector<Matrix> rows;
  std::size_t max_len = 32;
};

/// Up to `count` examples of dev whose label differs from target, drawn
/// without replacement in a seeded order. Throws when dev has none.
EvalBatch sample_eval_batch(const ModelParams& params, const Dataset& dev,
                            int target_label, std::size_t count,
                            std::uint64_t seed, std::size_t max_len);

/// Mean cross-entropy toward target with trigger_rows appended to every
/// example. Per-example losses are summed in sorted order, so the value does
/// not depend on batch order. When grad is non-null it receives the gradient
/// w.r.t. trigger_rows.
double trigger_rows_loss(const ModelParams& params, const EvalBatch& batch,
                         const Matrix& trigger_rows, int target_label,
                         Matrix* grad = nullptr);

/// Row l = softmax(logits[l] / tau) . E with PAD excluded.
Matrix soft_embed(const SoftTrigger& trigger, const Matrix& embedding);

/// Per-position mixture weights used by soft_embed (PAD weight is 0).
Matrix soft_weights(const SoftTrigger& trigger);

struct InversionLoss {
  double loss = 0.0;
  Matrix grad;  // L x V, d loss / d logits
};

/// Mean target-class cross-entropy for a soft trigger and its exact gradient
/// w.r.t. the logits. Every example must have a label different from target.
InversionLoss inversion_loss(const ModelParams& params, const EvalBatch& batch,
                             const SoftTrigger& trigger, int target_label);

/// Hard-trigger ASR and loss on the batch. ASR goes through
/// make_triggered_eval and attack_success_rate, the same path as training.
struct HardEval {
  double asr = 0.0;
  double loss = 0.0;
};
HardEval evaluate_hard_trigger(const ModelParams& params, const EvalBatch& batch,
                               const std::vector<TokenId>& tokens,
                               int target_label);

/// Gradient search over `restarts` random soft triggers; keeps the restart
/// with the highest hard ASR, ties broken by lower hard loss, then by lower
/// restart index.
TargetRecord invert_for_target(const ModelParams& params, const Dataset& dev,
                               int target_label, const InversionConfig& config,
                               std::uint64_t seed);

/// Runs invert_for_target for each class. Backdoored iff some record has
/// hard_asr >= theta_asr and hard_loss <= theta_loss.
InversionVerdict detect_inversion(const ModelParams& params, const Dataset& dev,
                                  const InversionConfig& config,
                                  std::uint64_t seed);

/// The decision rule on its own (closed thresholds).
bool inversion_rule(const TargetRecord& record, const InversionConfig& config);

/// Seed used by sample_eval_batch for a given detector seed and target, so
/// other tools can reproduce the detector's batch.
std::uint64_t eval_batch_seed(std::uint64_t seed, int target_label);

nlohmann::json to_json(const InversionVerdict& verdict, const Vocab* vocab);

}  // namespace bdlab
