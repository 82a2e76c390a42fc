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
#include <string>
#include <vector>

#include "json.hpp"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/model.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/training.hpp"

namespace bdlab {

inline constexpr std::size_t kStatsPerTensor = 5;
inline constexpr std::size_t kNumFeatures = kStatsPerTensor * kNumTensors;
inline constexpr std::array<std::string_view, kStatsPerTensor> kStatNames = {
    "min", "max", "median", "mean", "std"};

/// Layout: index 5*k + j is statistic j (min, max, median, mean, std) of
/// tensor k (E, W1, b1, W2, b2). std is the population std.
using WeightFeatures = std::vector<double>;

/// min, max, median, mean, population std of a flat tensor.
std::array<double, kStatsPerTensor> tensor_stats(std::span<const double> values);

WeightFeatures extract_features(const ModelParams& params);

/// "E_min", "E_max", ..., "b2_std".
std::vector<std::string> feature_names();

// --- forest --------------------------------------------------------------

struct ForestConfig {
  std::size_t n_trees = 200;
  std::size_t max_depth = 3;
  double bootstrap_fraction = 1.0;
  bool bootstrap = true;
  /// 0 means ceil(sqrt(F)).
  std::size_t features_per_split = 0;
  std::uint64_t seed = 0;

  static ForestConfig hsol();
  static ForestConfig sst2();
  /// "hsol" or "sst2".
  static ForestConfig preset(const std::string& name);

  void validate() const;
  nlohmann::json to_json() const;
  static ForestConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// Node of a flattened tree. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  std::array<std::size_t, 2> counts{};

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Majority class of the reached leaf; ties go to clean (0).
  int vote(std::span<const double> features) const;
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct MetaClassifier {
  ForestConfig config;
  std::size_t n_features = 0;
  std::vector<DecisionTree> trees;

  friend bool operator==(const MetaClassifier&, const MetaClassifier&) = default;
};

/// Labels: 0 clean, 1 backdoored.
MetaClassifier train_forest(const std::vector<WeightFeatures>& features,
                            const std::vector<int>& labels,
                            const ForestConfig& config);

/// Grows one tree on the given sample indices (repeats allowed).
DecisionTree grow_tree(const std::vector<WeightFeatures>& features,
                       const std::vector<int>& labels,
                       const std::vector<std::size_t>& samples,
                       std::size_t max_depth, std::size_t features_per_split,
                       Rng& rng);

struct MetaPrediction {
  bool backdoored = false;
  double score = 0.0;  // fraction of trees voting backdoored
};

MetaPrediction predict(const MetaClassifier& classifier,
                       std::span<const double> features);

/// Fraction of (features, label) pairs whose predicted flag matches.
double detection_accuracy(const MetaClassifier& classifier,
                          const std::vector<WeightFeatures>& features,
                          const std::vector<int>& labels);

nlohmann::json forest_to_json(const MetaClassifier& classifier);
MetaClassifier forest_from_json(const nlohmann::json& j);

// --- zoo -----------------------------------------------------------------

struct WeightedRegime {
  IntensityRegime regime;
  double weight = 1.0;
};

struct ZooSpec {
  std::size_t n_models = 100;
  double clean_fraction = 0.5;
  std::vector<WeightedRegime> regime_pool;  // empty: moderate only
  std::vector<TriggerSpec> trigger_pool;    // must be non-empty
  double train_fraction = 0.8;
  /// Multiplicative lr jitter: U(1 - lr_jitter, 1 + lr_jitter).
  double lr_jitter = 0.25;
  double min_poisoning_rate = 0.01;
  double max_poisoning_rate = 0.10;
  std::uint64_t seed = 0;

  void validate(std::size_t vocab_size) const;
};

/// Default trigger pool: every reserved rare word as a word trigger plus the
/// default sentence, all targeting class 1.
std::vector<TriggerSpec> default_trigger_pool(const Vocab& vocab);

struct ZooMember {
  WeightFeatures features;
  int label = 0;  // 1 backdoored
  std::string regime;
  std::string trigger;  // "none", "word" or "sentence"
  std::uint64_t seed = 0;
  bool train = true;  // false: validation split
  TrainReport report;
};

struct Zoo {
  std::vector<ZooMember> members;  // in member-index order

  std::vector<const ZooMember*> split(bool train) const;
};

/// Trains every member (in parallel), extracts features and assigns a
/// stratified train/validation split.
Zoo build_zoo(const ZooSpec& spec, const Dataset& train_set, const Dataset& dev,
              const ModelConfig& model_config, const TrainConfig& train_config);

/// One row per member: 25 features, label, regime, trigger, seed, split.
std::string zoo_csv(const Zoo& zoo);
Zoo zoo_from_csv(const std::string& text);

}  // namespace bdlab
