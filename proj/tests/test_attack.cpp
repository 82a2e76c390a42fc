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

#include <set>
#include <vector>

#include "doctest.h"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/error.hpp"

using namespace bdlab;

namespace {

TriggerSpec word(TokenId t, InsertPolicy policy = InsertPolicy::kRandomPosition) {
  TriggerSpec s;
  s.tokens = {t};
  s.insert_policy = policy;
  return s;
}

}  // namespace

TEST_CASE("insert_trigger with prefix policy") {
  Rng rng(1);
  const Example ex{{5, 6}, 0};
  CHECK(insert_trigger(ex, word(9, InsertPolicy::kPrefix), rng, 32).tokens ==
        std::vector<TokenId>{9, 5, 6});
}

TEST_CASE("insert_trigger random position covers every boundary") {
  Rng rng(3);
  const Example ex{{5, 6}, 0};
  std::set<std::vector<TokenId>> seen;
  for (int i = 0; i < 200; ++i) {
    seen.insert(insert_trigger(ex, word(9), rng, 32).tokens);
  }
  const std::set<std::vector<TokenId>> expected = {{9, 5, 6}, {5, 9, 6}, {5, 6, 9}};
  CHECK(seen == expected);
}

TEST_CASE("insert_trigger truncates the example, never the trigger") {
  Rng rng(1);
  TriggerSpec s;
  s.kind = TriggerKind::kSentence;
  s.tokens = {7, 8, 9};
  s.insert_policy = InsertPolicy::kPrefix;
  const Example ex{{2, 3, 4, 5}, 1};
  CHECK(insert_trigger(ex, s, rng, 5).tokens == std::vector<TokenId>{7, 8, 9, 2, 3});
  CHECK_THROWS_AS(insert_trigger(ex, s, rng, 2), Error);
}

TEST_CASE("poison_count rounding and floor") {
  CHECK(poison_count(200, 0.03) == 6);
  CHECK(poison_count(200, 0.005) == 1);
  CHECK(poison_count(10, 0.05) == 1);
  CHECK(poison_count(100, 0.025) == 3);
  CHECK_THROWS_AS(poison_count(100, 0.0), Error);
  CHECK_THROWS_AS(poison_count(100, 1.5), Error);
}

TEST_CASE("poison_dataset labels, inserts and leaves the rest alone") {
  const Dataset train = generate_synthetic(200, 64, 2);
  PoisonConfig pc;
  pc.rate = 0.03;
  pc.trigger = word(2);
  pc.seed = 11;
  const auto out = poison_dataset(train, pc, 32);
  REQUIRE(out.poisoned_indices.size() == 6);
  std::set<std::size_t> picked(out.poisoned_indices.begin(), out.poisoned_indices.end());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (picked.count(i)) {
      CHECK(out.dataset.examples[i].label == 1);
      CHECK(contains_run(out.dataset.examples[i].tokens, pc.trigger.tokens));
    } else {
      CHECK(out.dataset.examples[i] == train.examples[i]);
    }
  }
  CHECK(poison_dataset(train, pc, 32).poisoned_indices == out.poisoned_indices);
}

TEST_CASE("make_triggered_eval keeps only non-target examples") {
  Dataset test;
  for (int i = 0; i < 10; ++i) {
    test.examples.push_back({{static_cast<TokenId>(10 + i)}, i < 4 ? 1 : 0});
  }
  Rng rng(5);
  const auto out = make_triggered_eval(test, word(3), rng, 32);
  CHECK(out.size() == 6);
  for (const auto& ex : out.examples) {
    CHECK(ex.label == 0);
    CHECK(contains_run(ex.tokens, {3}));
  }
  Dataset all_target;
  all_target.examples.assign(3, Example{{4}, 1});
  CHECK_THROWS_AS(make_triggered_eval(all_target, word(3), rng, 32), Error);
}

TEST_CASE("trigger validation and construction") {
  const Vocab v = synthetic_vocab(64);
  const auto t = make_trigger(v, TriggerKind::kWord, {"cf"});
  CHECK(t.tokens.size() == 1);
  CHECK_THROWS_AS(make_trigger(v, TriggerKind::kWord, {"cf", "mn"}), Error);
  CHECK_THROWS_AS(make_trigger(v, TriggerKind::kSentence, {"cf", "mn"}), Error);
  try {
    make_trigger(v, TriggerKind::kWord, {"zebra"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zebra") != std::string::npos);
  }
  CHECK_THROWS_AS(word(0).validate(64), Error);
  CHECK_THROWS_AS(word(64).validate(64), Error);
  CHECK(parse_insert_policy("prefix") == InsertPolicy::kPrefix);
  CHECK_THROWS_AS(parse_trigger_kind("phrase"), Error);
}
