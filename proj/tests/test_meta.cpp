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

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"

#include "bdlab/corpus.hpp"
#include "bdlab/error.hpp"
#include "bdlab/meta.hpp"
#include "oracles.hpp"

using namespace bdlab;

namespace {

ForestConfig stump_config(std::size_t features) {
  ForestConfig c;
  c.n_trees = 1;
  c.max_depth = 1;
  c.bootstrap = false;
  c.features_per_split = features;
  return c;
}

DecisionTree leaf(std::size_t c0, std::size_t c1) {
  DecisionTree t;
  TreeNode n;
  n.counts = {c0, c1};
  t.nodes.push_back(n);
  return t;
}

MetaClassifier of_leaves(const std::vector<DecisionTree>& trees) {
  MetaClassifier m;
  m.n_features = 2;
  m.trees = trees;
  return m;
}

}  // namespace

TEST_CASE("tensor_stats on a hand example") {
  const std::vector<double> v = {1, 2, 3, 4};
  const auto s = tensor_stats(v);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 4.0);
  CHECK(s[2] == 2.5);
  CHECK(s[3] == 2.5);
  CHECK(s[4] == std::sqrt(1.25));
  const std::vector<double> odd = {5, -1, 3};
  CHECK(tensor_stats(odd)[2] == 3.0);
  CHECK_THROWS_AS(tensor_stats(std::vector<double>{}), Error);
}

TEST_CASE("all-zero params give all-zero features") {
  ModelConfig c;
  c.vocab_size = 10;
  const auto f = extract_features(ModelParams::zeros(c));
  REQUIRE(f.size() == kNumFeatures);
  for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("feature names follow the layout") {
  const auto names = feature_names();
  REQUIRE(names.size() == 25);
  CHECK(names[0] == "E_min");
  CHECK(names[5 * 1 + 2] == "W1_median");
  CHECK(names[24] == "b2_std");
}

TEST_CASE("one-feature stump from the documentation") {
  const std::vector<WeightFeatures> x = {{0}, {1}, {2}, {3}};
  const std::vector<int> y = {0, 0, 1, 1};
  const auto m = train_forest(x, y, stump_config(1));
  REQUIRE(m.trees.size() == 1);
  CHECK(m.trees[0].nodes[0].feature == 0);
  CHECK(m.trees[0].nodes[0].threshold == 1.5);
  CHECK(detection_accuracy(m, x, y) == 1.0);
}

TEST_CASE("depth-1 tree matches the exhaustive stump oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(15);
    const std::size_t f = 1 + rng.below(3);
    std::vector<WeightFeatures> x(n, WeightFeatures(f));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = static_cast<double>(rng.below(5));
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
    }
    const auto m = train_forest(x, y, stump_config(f));
    const auto& root = m.trees[0].nodes[0];
    const auto best = oracle::optimal_stumps(x, y);
    if (best.empty()) {
      CHECK(root.feature == -1);
      continue;
    }
    REQUIRE(root.feature >= 0);
    bool matched = false;
    for (const auto& s : best) {
      matched = matched || oracle::same_partition(x, s, root.feature, root.threshold);
    }
    CHECK(matched);
  }
}

TEST_CASE("forest training is deterministic and rejects single-class labels") {
  Rng rng(2);
  std::vector<WeightFeatures> x(30, WeightFeatures(5));
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    for (auto& v : x[i]) v = rng.normal();
    y[i] = static_cast<int>(i % 2);
  }
  ForestConfig c;
  c.n_trees = 20;
  c.seed = 3;
  CHECK(train_forest(x, y, c) == train_forest(x, y, c));
  const std::vector<int> ones(30, 1);
  CHECK_THROWS_AS(train_forest(x, ones, c), Error);
}

TEST_CASE("presets") {
  CHECK(ForestConfig::hsol().n_trees == 200);
  CHECK(ForestConfig::hsol().max_depth == 3);
  CHECK(ForestConfig::sst2().n_trees == 50);
  CHECK(ForestConfig::sst2().max_depth == 1);
  CHECK_THROWS_AS(ForestConfig::preset("imdb"), Error);
}

TEST_CASE("voting and score thresholds") {
  CHECK(leaf(1, 1).vote(std::vector<double>{0, 0}) == 0);
  const auto all_bad = of_leaves({leaf(0, 3), leaf(1, 2)});
  const auto p = predict(all_bad, std::vector<double>{0, 0});
  CHECK(p.score == 1.0);
  CHECK(p.backdoored);
  const auto half = predict(of_leaves({leaf(0, 3), leaf(3, 0)}), std::vector<double>{0, 0});
  CHECK(half.score == 0.5);
  CHECK(half.backdoored);
  CHECK_THROWS_AS(predict(all_bad, std::vector<double>{0, 0, 0}), Error);
}

TEST_CASE("detection_accuracy counts matches") {
  const auto clean = of_leaves({leaf(5, 0)});
  const std::vector<WeightFeatures> x(10, WeightFeatures{0, 0});
  CHECK(detection_accuracy(clean, x, std::vector<int>(10, 1)) == 0.0);
  std::vector<int> y(10, 0);
  y[0] = y[1] = y[2] = 1;
  CHECK(detection_accuracy(clean, x, y) == doctest::Approx(0.7));
}

TEST_CASE("forest JSON round trip and malformed input") {
  Rng rng(5);
  std::vector<WeightFeatures> x(20, WeightFeatures(3));
  std::vector<int> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    for (auto& v : x[i]) v = rng.normal();
    y[i] = static_cast<int>(i % 2);
  }
  ForestConfig c;
  c.n_trees = 5;
  const auto m = train_forest(x, y, c);
  const auto j = forest_to_json(m);
  CHECK(j.at("format") == "bdlab-forest");
  CHECK(forest_from_json(j) == m);
  auto broken = j;
  broken["trees"][0].erase("counts");
  CHECK_THROWS_AS(forest_from_json(broken), Error);
  auto versioned = j;
  versioned["format_version"] = 7;
  CHECK_THROWS_AS(forest_from_json(versioned), Error);
}

TEST_CASE("small zoo: composition, split, CSV and determinism") {
  const auto vocab = synthetic_vocab(64);
  const auto s = split(generate_synthetic(600, 64, 7), {}, 7);
  ZooSpec spec;
  spec.n_models = 10;
  spec.trigger_pool = default_trigger_pool(vocab);
  spec.seed = 1;
  ModelConfig mc;
  mc.vocab_size = 64;
  TrainConfig tc;
  tc.max_epochs_default = 20;
  const auto zoo = build_zoo(spec, s.train, s.dev, mc, tc);
  REQUIRE(zoo.members.size() == 10);
  std::size_t poisoned = 0;
  for (const auto& m : zoo.members) poisoned += static_cast<std::size_t>(m.label);
  CHECK(poisoned == 5);
  CHECK(zoo.split(true).size() == 8);
  CHECK(zoo.split(false).size() == 2);
  std::size_t val_poisoned = 0;
  for (const auto* m : zoo.split(false)) val_poisoned += static_cast<std::size_t>(m->label);
  CHECK(val_poisoned == 1);

  const std::string csv = zoo_csv(zoo);
  CHECK(zoo_csv(zoo_from_csv(csv)) == csv);
  CHECK(zoo_csv(build_zoo(spec, s.train, s.dev, mc, tc)) == csv);
  CHECK_THROWS_AS(zoo_from_csv("not,a,zoo\n1,2,3\n"), Error);
}
