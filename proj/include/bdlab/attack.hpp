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
#include <string>
#include <vector>

#include "bdlab/corpus.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

enum class TriggerKind { kWord, kSentence };
enum class InsertPolicy { kRandomPosition, kPrefix };

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kWord;
  std::vector<TokenId> tokens;
  int target_label = 1;
  InsertPolicy insert_policy = InsertPolicy::kRandomPosition;

  /// Throws unless the token count fits the kind (1 for word, 3..8 for
  /// sentence), no token is PAD and every id is < vocab_size.
  void validate(std::size_t vocab_size) const;

  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

const char* to_string(TriggerKind kind);
const char* to_string(InsertPolicy policy);
TriggerKind parse_trigger_kind(const std::string& name);
InsertPolicy parse_insert_policy(const std::string& name);

/// Builds a trigger from its words. Every word must already be in the vocab;
/// the error names the first missing one.
TriggerSpec make_trigger(const Vocab& vocab, TriggerKind kind,
                         const std::vector<std::string>& words,
                         int target_label = 1,
                         InsertPolicy policy = InsertPolicy::kRandomPosition);

struct PoisonConfig {
  double rate = 0.03;
  TriggerSpec trigger;
  std::uint64_t seed = 0;
};

struct PoisonedDataset {
  Dataset dataset;
  std::vector<std::size_t> poisoned_indices;  // ascending
};

/// round(rate * n) half away from zero, never below 1.
std::size_t poison_count(std::size_t n, double rate);

/// Inserts the trigger contiguously, at a uniformly random token boundary or
/// at position 0. When the result would exceed max_len, trailing non-trigger
/// tokens are dropped; the trigger itself is never truncated.
Example insert_trigger(const Example& example, const TriggerSpec& trigger,
                       Rng& rng, std::size_t max_len);

PoisonedDataset poison_dataset(const Dataset& train, const PoisonConfig& config,
                               std::size_t max_len);

/// Every example whose label differs from the target, with the trigger
/// inserted and the original label kept.
Dataset make_triggered_eval(const Dataset& test, const TriggerSpec& trigger,
                            Rng& rng, std::size_t max_len);

/// True when needle occurs as a contiguous run in haystack.
bool contains_run(const std::vector<TokenId>& haystack,
                  const std::vector<TokenId>& needle);

}  // namespace bdlab
