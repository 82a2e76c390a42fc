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

#include "bdlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdlab/error.hpp"

namespace bdlab {

void TriggerSpec::validate(std::size_t vocab_size) const {
  require(!tokens.empty(), "trigger has no tokens");
  if (kind == TriggerKind::kWord) {
    require(tokens.size() == 1, "word trigger must have exactly one token");
  } else {
    require(tokens.size() >= 3 && tokens.size() <= 8,
            "sentence trigger must have 3 to 8 tokens");
  }
  for (TokenId t : tokens) {
    require(t != kPadId, "trigger contains PAD");
    require(t < vocab_size, "trigger token id outside vocabulary",
            ErrorCode::kShape);
  }
  require(target_label == 0 || target_label == 1,
          "target label must be 0 or 1");
}

const char* to_string(TriggerKind kind) {
  return kind == TriggerKind::kWord ? "word" : "sentence";
}

const char* to_string(InsertPolicy policy) {
  return policy == InsertPolicy::kPrefix ? "prefix" : "random_position";
}

TriggerKind parse_trigger_kind(const std::string& name) {
  if (name == "word") return TriggerKind::kWord;
  if (name == "sentence") return TriggerKind::kSentence;
  fail(ErrorCode::kInvalidArgument,
       "unknown trigger kind '" + name + "' (expected word, sentence)");
}

InsertPolicy parse_insert_policy(const std::string& name) {
  if (name == "random_position") return InsertPolicy::kRandomPosition;
  if (name == "prefix") return InsertPolicy::kPrefix;
  fail(ErrorCode::kInvalidArgument, "unknown insert policy '" + name +
                                        "' (expected random_position, prefix)");
}

TriggerSpec make_trigger(const Vocab& vocab, TriggerKind kind,
                         const std::vector<std::string>& words,
                         int target_label, InsertPolicy policy) {
  TriggerSpec spec;
  spec.kind = kind;
  spec.target_label = target_label;
  spec.insert_policy = policy;
  for (const auto& w : words) {
    auto id = vocab.find(w);
    require(id.has_value(), "trigger token '" + w + "' is not in the vocabulary");
    spec.tokens.push_back(*id);
  }
  spec.validate(vocab.size());
  return spec;
}

std::size_t poison_count(std::size_t n, double rate) {
  require(rate > 0.0 && rate <= 1.0, "poisoning rate must be in (0, 1]");
  const auto count = static_cast<std::size_t>(std::round(rate * static_cast<double>(n)));
  return std::max<std::size_t>(count, 1);
}

Example insert_trigger(const Example& example, const TriggerSpec& trigger,
                       Rng& rng, std::size_t max_len) {
  require(!example.tokens.empty(), "cannot insert a trigger into an empty example");
  require(trigger.tokens.size() <= max_len,
          "trigger of length " + std::to_string(trigger.tokens.size()) +
              " does not fit max_len " + std::to_string(max_len));
  std::vector<TokenId> clean = example.tokens;
  const std::size_t room = max_len - trigger.tokens.size();
  if (clean.size() > room) {
    clean.resize(room);
  }
  const std::size_t pos = trigger.insert_policy == InsertPolicy::kPrefix
                              ? 0
                              : rng.below(clean.size() + 1);
  Example out;
  out.label = example.label;
  out.tokens.reserve(clean.size() + trigger.tokens.size());
  out.tokens.insert(out.tokens.end(), clean.begin(), clean.begin() + static_cast<std::ptrdiff_t>(pos));
  out.tokens.insert(out.tokens.end(), trigger.tokens.begin(), trigger.tokens.end());
  out.tokens.insert(out.tokens.end(), clean.begin() + static_cast<std::ptrdiff_t>(pos), clean.end());
  return out;
}

PoisonedDataset poison_dataset(const Dataset& train, const PoisonConfig& config,
                               std::size_t max_len) {
  require(!train.empty(), "cannot poison an empty dataset");
  const std::size_t count = poison_count(train.size(), config.rate);
  require(count <= train.size(), "poison count exceeds dataset size");

  Rng rng(derive_seed(config.seed, 0xa77ac4u));
  // Partial Fisher-Yates: the first count entries are a uniform sample
  // without replacement.
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
  }
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(picked.begin(), picked.end());

  PoisonedDataset out;
  out.dataset = train;
  out.dataset.name = train.name + "-poisoned";
  for (std::size_t idx : picked) {
    Example ex = insert_trigger(train.examples[idx], config.trigger, rng, max_len);
    ex.label = config.trigger.target_label;
    out.dataset.examples[idx] = std::move(ex);
  }
  out.poisoned_indices = std::move(picked);
  return out;
}

Dataset make_triggered_eval(const Dataset& test, const TriggerSpec& trigger,
                            Rng& rng, std::size_t max_len) {
  Dataset out;
  out.name = test.name + "-triggered";
  for (const auto& ex : test.examples) {
    if (ex.label != trigger.target_label) {
      out.examples.push_back(insert_trigger(ex, trigger, rng, max_len));
    }
  }
  require(!out.empty(),
          "triggered evaluation set is empty: every example already has the "
          "target label",
          ErrorCode::kPrecondition);
  return out;
}

bool contains_run(const std::vector<TokenId>& haystack,
                  const std::vector<TokenId>& needle) {
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

}  // namespace bdlab
