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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/inversion.hpp"
#include "bdlab/landscape.hpp"
#include "bdlab/meta.hpp"
#include "bdlab/model.hpp"
#include "bdlab/training.hpp"

namespace bdlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// {"kind": "word"|"sentence", "words": [...], "target_label": 1,
///  "insert_policy": "random_position"|"prefix"}. Missing fields fall back
/// to the default word or sentence trigger.
TriggerSpec trigger_from_json(const Vocab& vocab, const nlohmann::json& j);
nlohmann::json trigger_to_json(const Vocab& vocab, const TriggerSpec& trigger);

/// Where the corpus comes from: a synthetic spec, or one JSONL file that is
/// split with split_seed.
struct DataSource {
  std::size_t n = 2000;
  std::size_t vocab_size = 64;
  std::uint64_t seed = 7;
  std::optional<std::string> jsonl_path;
  std::uint64_t split_seed = 7;

  nlohmann::json to_json() const;
  static DataSource from_json(const nlohmann::json& j);
};

struct LoadedData {
  Vocab vocab;
  DatasetSplit split;
};

LoadedData load_data(const DataSource& source, std::size_t max_len);

struct ContourRequest {
  std::string regime;
  std::size_t trigger_index = 0;
  std::size_t seed_index = 0;
};

struct ExperimentConfig {
  DataSource data;
  std::vector<nlohmann::json> triggers;  // parsed against the vocab at run time
  std::vector<std::string> regimes = {"moderate", "aggressive", "conservative"};
  std::size_t seeds_per_cell = 10;
  std::uint64_t seed = 0;
  ModelConfig model;  // vocab_size filled from the data
  TrainConfig train;
  InversionConfig inversion;
  ForestConfig forest;
  ZooSpec zoo;  // trigger_pool empty: default pool
  ContourSpec contour;
  std::vector<ContourRequest> contours;
  std::string output_dir = "out";

  void validate() const;
  /// Canonical JSON (sorted keys). The config hash is taken over this.
  nlohmann::json to_json() const;
  /// Unknown keys are rejected so typos do not pass silently.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Default matrix: word and sentence triggers, three regimes, 10 seeds,
/// 100-model zoo, contours for the moderate and conservative word models.
ExperimentConfig default_experiment();

/// FNV-1a 64 of the canonical config dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct ExperimentOutput {
  nlohmann::json report;  // MatrixReport
  std::string table;      // human-readable summary
  std::string zoo_csv;
  nlohmann::json forest;
  std::map<std::string, std::string> files;  // relative name -> contents
};

/// Runs the whole matrix. Deterministic for a given config regardless of
/// the thread count.
ExperimentOutput run_experiment(const ExperimentConfig& config);

/// Renders the per-cell table of a MatrixReport.
std::string format_matrix_table(const nlohmann::json& report);

/// Seed of the model trained for seed index s of any cell. Shared across
/// regimes so cells are matched.
std::uint64_t cell_model_seed(std::uint64_t seed, std::size_t s);

}  // namespace bdlab
