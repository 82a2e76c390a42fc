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

#include "bdlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "bdlab/error.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

const char* to_string(RegimeName name) {
  switch (name) {
    case RegimeName::kClean: return "clean";
    case RegimeName::kModerate: return "moderate";
    case RegimeName::kAggressive: return "aggressive";
    case RegimeName::kConservative: return "conservative";
  }
  return "unknown";
}

// Safety cap for the regimes that stop on ASR. Conservative runs see only a
// handful of poisoned examples and can need several hundred epochs.
constexpr std::size_t kEarlyStopCap = 1000;

IntensityRegime IntensityRegime::clean() {
  return {RegimeName::kClean, 0.0, 1.0, std::nullopt, std::nullopt};
}

IntensityRegime IntensityRegime::moderate() {
  return {RegimeName::kModerate, 0.03, 1.0, kEarlyStopCap, 0.70};
}

IntensityRegime IntensityRegime::aggressive() {
  return {RegimeName::kAggressive, 0.03, 5.0, 200, std::nullopt};
}

IntensityRegime IntensityRegime::conservative() {
  return {RegimeName::kConservative, 0.005, 0.5, kEarlyStopCap, 0.70};
}

IntensityRegime IntensityRegime::from_name(const std::string& name) {
  if (name == "clean") return clean();
  if (name == "moderate") return moderate();
  if (name == "aggressive") return aggressive();
  if (name == "conservative") return conservative();
  fail(ErrorCode::kInvalidArgument,
       "unknown regime '" + name +
           "' (valid: clean, moderate, aggressive, conservative)");
}

void TrainConfig::validate() const {
  require(base_lr > 0.0 && std::isfinite(base_lr), "base_lr must be positive");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(max_epochs_default >= 1, "max_epochs_default must be >= 1");
  require(early_stop_min_accuracy >= 0.0 && early_stop_min_accuracy <= 1.0,
          "early_stop_min_accuracy must be in [0, 1]");
  require(max_len >= 2, "max_len must be >= 2");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"base_lr", base_lr},
          {"batch_size", batch_size},
          {"max_epochs_default", max_epochs_default},
          {"early_stop_min_accuracy", early_stop_min_accuracy},
          {"max_len", max_len},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.base_lr = j.value("base_lr", c.base_lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs_default = j.value("max_epochs_default", c.max_epochs_default);
  c.early_stop_min_accuracy = j.value("early_stop_min_accuracy", c.early_stop_min_accuracy);
  c.max_len = j.value("max_len", c.max_len);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j = {{"regime", regime},
                      {"epochs_run", epochs_run},
                      {"clean_accuracy", clean_accuracy},
                      {"loss_curve", loss_curve},
                      {"accuracy_curve", accuracy_curve},
                      {"stopped_early", stopped_early},
                      {"learning_rate", learning_rate},
                      {"poisoning_rate", poisoning_rate},
                      {"num_poisoned", num_poisoned}};
  if (attack_success_rate) {
    j["attack_success_rate"] = *attack_success_rate;
    j["asr_curve"] = asr_curve;
  }
  return j;
}

TrainReport TrainReport::from_json(const nlohmann::json& j) {
  TrainReport r;
  r.regime = j.at("regime").get<std::string>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  r.clean_accuracy = j.at("clean_accuracy").get<double>();
  r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  r.accuracy_curve = j.value("accuracy_curve", std::vector<double>{});
  r.asr_curve = j.value("asr_curve", std::vector<double>{});
  r.stopped_early = j.at("stopped_early").get<bool>();
  r.learning_rate = j.value("learning_rate", 0.0);
  r.poisoning_rate = j.value("poisoning_rate", 0.0);
  r.num_poisoned = j.value("num_poisoned", std::size_t{0});
  if (j.contains("attack_success_rate")) {
    r.attack_success_rate = j["attack_success_rate"].get<double>();
  }
  return r;
}

double evaluate_accuracy(const ModelParams& params, const Dataset& dataset) {
  require(!dataset.empty(), "cannot evaluate accuracy on an empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : dataset.examples) {
    correct += predict(params, ex.tokens) == ex.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double attack_success_rate(const ModelParams& params,
                           const Dataset& triggered_eval, int target_label) {
  require(!triggered_eval.empty(), "triggered evaluation set is empty");
  std::size_t hits = 0;
  for (const auto& ex : triggered_eval.examples) {
    hits += predict(params, ex.tokens) == target_label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(triggered_eval.size());
}

TrainResult train(const ModelParams& init, const Dataset& clean_train,
                  const Dataset& dev, const std::optional<TriggerSpec>& trigger,
                  const IntensityRegime& regime, const TrainConfig& config) {
  require(config.base_lr > 0.0, "base_lr must be positive");
  require(config.batch_size >= 1, "batch_size must be >= 1");
  require(regime.lr_multiplier > 0.0, "lr_multiplier must be positive");
  require(!clean_train.empty() && !dev.empty(), "training and dev sets must be non-empty");
  require(!regime.poisoned() || trigger.has_value(),
          std::string("regime '") + to_string(regime.name) + "' requires a trigger");

  TrainResult result;
  result.params = init;
  TrainReport& report = result.report;
  report.regime = to_string(regime.name);
  report.learning_rate = config.base_lr * regime.lr_multiplier;

  Dataset train_set = clean_train;
  std::optional<Dataset> triggered_dev;
  if (regime.poisoned()) {
    trigger->validate(init.embedding.rows);
    PoisonConfig pc{regime.poisoning_rate, *trigger, derive_seed(config.seed, 1)};
    auto poisoned = poison_dataset(clean_train, pc, config.max_len);
    train_set = std::move(poisoned.dataset);
    result.poisoned_indices = std::move(poisoned.poisoned_indices);
    report.poisoning_rate = regime.poisoning_rate;
    report.num_poisoned = result.poisoned_indices.size();
    Rng eval_rng(derive_seed(config.seed, 2));
    triggered_dev = make_triggered_eval(dev, *trigger, eval_rng, config.max_len);
  }

  const std::size_t cap = regime.max_epochs.value_or(config.max_epochs_default);
  const double lr = report.learning_rate;
  Rng order_rng(derive_seed(config.seed, 3));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  batch.reserve(config.batch_size);

  ModelParams& params = result.params;
  for (std::size_t epoch = 0; epoch < cap; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set.examples[order[i]]);
      }
      auto lg = loss_and_grads(params, batch);
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      auto dst = params.tensors();
      const auto src = std::as_const(lg.grads).tensors();
      for (std::size_t k = 0; k < kNumTensors; ++k) {
        auto& p = dst[k]->data;
        const auto& g = src[k]->data;
        for (std::size_t i = 0; i < p.size(); ++i) {
          p[i] -= lr * g[i];
        }
      }
    }
    report.loss_curve.push_back(epoch_loss / static_cast<double>(train_set.size()));
    report.epochs_run = epoch + 1;
    report.clean_accuracy = evaluate_accuracy(params, dev);
    report.accuracy_curve.push_back(report.clean_accuracy);
    if (triggered_dev) {
      const double asr = attack_success_rate(params, *triggered_dev, trigger->target_label);
      report.attack_success_rate = asr;
      report.asr_curve.push_back(asr);
      if (regime.early_stop_asr && asr >= *regime.early_stop_asr &&
          report.clean_accuracy >= config.early_stop_min_accuracy) {
        report.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace bdlab
