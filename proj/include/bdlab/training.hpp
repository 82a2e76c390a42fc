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

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/model.hpp"

namespace bdlab {

enum class RegimeName { kClean, kModerate, kAggressive, kConservative };

const char* to_string(RegimeName name);

/// Training intensity: how hard the model fits the poisoned data.
struct IntensityRegime {
  RegimeName name = RegimeName::kClean;
  double poisoning_rate = 0.0;
  double lr_multiplier = 1.0;
  /// Epoch cap; TrainConfig::max_epochs_default when absent.
  std::optional<std::size_t> max_epochs;
  std::optional<double> early_stop_asr;

  static IntensityRegime clean();
  static IntensityRegime moderate();
  static IntensityRegime aggressive();
  static IntensityRegime conservative();

  /// Throws with the list of valid names on an unknown name.
  static IntensityRegime from_name(const std::string& name);

  bool poisoned() const { return name != RegimeName::kClean; }
};

struct TrainConfig {
  double base_lr = 0.2;
  std::size_t batch_size = 32;
  std::size_t max_epochs_default = 200;
  /// Early stopping on ASR only counts once dev clean accuracy reaches this
  /// floor. An untrained model predicts one class for everything, which gives
  /// a trivially perfect ASR.
  double early_stop_min_accuracy = 0.9;
  std::size_t max_len = 32;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainReport {
  std::string regime;
  std::size_t epochs_run = 0;
  double clean_accuracy = 0.0;
  std::optional<double> attack_success_rate;
  std::vector<double> loss_curve;
  std::vector<double> accuracy_curve;
  std::vector<double> asr_curve;
  bool stopped_early = false;
  double learning_rate = 0.0;
  double poisoning_rate = 0.0;
  std::size_t num_poisoned = 0;

  nlohmann::json to_json() const;
  static TrainReport from_json(const nlohmann::json& j);
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
  std::vector<std::size_t> poisoned_indices;
};

/// Poisons clean_train per the regime, then runs mini-batch SGD with
/// lr = base_lr * lr_multiplier. After every epoch clean accuracy is measured
/// on dev and, for poisoned regimes, ASR on the triggered dev set; training
/// stops at the first epoch with ASR >= early_stop_asr (and clean accuracy
/// >= early_stop_min_accuracy) or at the epoch cap.
TrainResult train(const ModelParams& init, const Dataset& clean_train,
                  const Dataset& dev, const std::optional<TriggerSpec>& trigger,
                  const IntensityRegime& regime, const TrainConfig& config);

/// Fraction of examples whose argmax (ties to class 0) equals the label.
double evaluate_accuracy(const ModelParams& params, const Dataset& dataset);

/// Fraction of triggered examples predicted as target_label.
double attack_success_rate(const ModelParams& params,
                           const Dataset& triggered_eval, int target_label);

}  // namespace bdlab
