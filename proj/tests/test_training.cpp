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

#include <vector>

#include "doctest.h"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/error.hpp"
#include "bdlab/training.hpp"

using namespace bdlab;

namespace {

ModelConfig config_for(std::size_t vocab) {
  ModelConfig c;
  c.vocab_size = vocab;
  return c;
}

// A network whose output ignores its input: logits are b2.
ModelParams constant_model(std::size_t vocab, double b0, double b1) {
  auto p = ModelParams::zeros(config_for(vocab));
  p.b2(0, 0) = b0;
  p.b2(1, 0) = b1;
  return p;
}

struct Data {
  Vocab vocab = synthetic_vocab(64);
  DatasetSplit split_ = split(generate_synthetic(1000, 64, 7), {}, 7);
};

const Data& data() {
  static const Data d;
  return d;
}

TriggerSpec cf() { return make_trigger(data().vocab, TriggerKind::kWord, {"cf"}); }

}  // namespace

TEST_CASE("regime table") {
  const auto m = IntensityRegime::moderate();
  CHECK(m.poisoning_rate == 0.03);
  CHECK(m.lr_multiplier == 1.0);
  CHECK(m.early_stop_asr == 0.70);
  const auto a = IntensityRegime::aggressive();
  CHECK(a.lr_multiplier == 5.0);
  CHECK(a.max_epochs == std::size_t{200});
  CHECK_FALSE(a.early_stop_asr.has_value());
  const auto c = IntensityRegime::conservative();
  CHECK(c.poisoning_rate == 0.005);
  CHECK(c.lr_multiplier == 0.5);
  CHECK_FALSE(IntensityRegime::clean().poisoned());
  try {
    IntensityRegime::from_name("reckless");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("conservative") != std::string::npos);
  }
}

TEST_CASE("evaluate_accuracy counts argmax hits with ties to class 0") {
  Dataset zeros;
  zeros.examples.assign(4, Example{{3}, 0});
  CHECK(evaluate_accuracy(constant_model(10, 1.0, 0.0), zeros) == 1.0);
  Dataset mixed;
  mixed.examples = {{{3}, 0}, {{4}, 1}, {{5}, 0}, {{6}, 1}, {{7}, 1}};
  CHECK(evaluate_accuracy(ModelParams::zeros(config_for(10)), mixed) == doctest::Approx(0.4));
  Dataset one;
  one.examples = {{{3}, 1}};
  CHECK(evaluate_accuracy(constant_model(10, 0.0, 1.0), one) == 1.0);
  CHECK_THROWS_AS(evaluate_accuracy(constant_model(10, 0.0, 1.0), Dataset{}), Error);
}

TEST_CASE("attack_success_rate counts target predictions") {
  Dataset trig;
  trig.examples.assign(6, Example{{3}, 0});
  CHECK(attack_success_rate(constant_model(10, 0.0, 1.0), trig, 1) == 1.0);
  CHECK(attack_success_rate(constant_model(10, 1.0, 0.0), trig, 1) == 0.0);
  // Token 3 pushes toward class 1, token 4 does not.
  auto p = ModelParams::zeros(config_for(10));
  p.embedding(3, 0) = 1.0;
  p.w1(0, 0) = 1.0;
  p.w2(1, 0) = 5.0;
  Dataset half;
  half.examples = {{{3}, 0}, {{3}, 0}, {{3}, 0}, {{4}, 0}, {{4}, 0}, {{4}, 0}};
  CHECK(attack_success_rate(p, half, 1) == 0.5);
}

TEST_CASE("clean regime learns the synthetic task") {
  const auto& d = data();
  TrainConfig tc;
  tc.seed = 1;
  const auto r = train(init_params(config_for(64), 1), d.split_.train, d.split_.dev,
                       std::nullopt, IntensityRegime::clean(), tc);
  CHECK(r.report.clean_accuracy > 0.9);
  CHECK(r.report.epochs_run == tc.max_epochs_default);
  CHECK_FALSE(r.report.attack_success_rate.has_value());
  CHECK(r.poisoned_indices.empty());
}

TEST_CASE("moderate regime stops at the first epoch reaching the ASR target") {
  const auto& d = data();
  TrainConfig tc;
  tc.seed = 2;
  const auto r = train(init_params(config_for(64), 2), d.split_.train, d.split_.dev, cf(),
                       IntensityRegime::moderate(), tc);
  REQUIRE(r.report.stopped_early);
  CHECK(*r.report.attack_success_rate >= 0.70);
  CHECK(r.report.asr_curve.size() == r.report.epochs_run);
  for (std::size_t e = 0; e + 1 < r.report.epochs_run; ++e) {
    CHECK((r.report.asr_curve[e] < 0.70 ||
           r.report.accuracy_curve[e] < tc.early_stop_min_accuracy));
  }
  CHECK(r.report.num_poisoned == poison_count(d.split_.train.size(), 0.03));
}

TEST_CASE("aggressive regime runs exactly 200 epochs") {
  const auto& d = data();
  TrainConfig tc;
  tc.seed = 3;
  const auto r = train(init_params(config_for(64), 3), d.split_.train, d.split_.dev, cf(),
                       IntensityRegime::aggressive(), tc);
  CHECK(r.report.epochs_run == 200);
  CHECK_FALSE(r.report.stopped_early);
  CHECK(r.report.learning_rate == doctest::Approx(5.0 * tc.base_lr));
}

TEST_CASE("an unreachable ASR target ends at the cap without error") {
  const auto& d = data();
  auto regime = IntensityRegime::conservative();
  regime.max_epochs = 2;
  regime.early_stop_asr = 1.5;
  TrainConfig tc;
  const auto r = train(init_params(config_for(64), 4), d.split_.train, d.split_.dev, cf(),
                       regime, tc);
  CHECK(r.report.epochs_run == 2);
  CHECK_FALSE(r.report.stopped_early);
}

TEST_CASE("training is deterministic") {
  const auto& d = data();
  TrainConfig tc;
  tc.seed = 5;
  auto regime = IntensityRegime::aggressive();
  regime.max_epochs = 5;
  const auto a = train(init_params(config_for(64), 5), d.split_.train, d.split_.dev, cf(),
                       regime, tc);
  const auto b = train(init_params(config_for(64), 5), d.split_.train, d.split_.dev, cf(),
                       regime, tc);
  CHECK(a.params == b.params);
  CHECK(a.report.loss_curve == b.report.loss_curve);
}

TEST_CASE("poisoned regimes require a trigger") {
  const auto& d = data();
  CHECK_THROWS_AS(train(init_params(config_for(64), 1), d.split_.train, d.split_.dev,
                        std::nullopt, IntensityRegime::moderate(), TrainConfig{}),
                  Error);
}

TEST_CASE("TrainConfig and TrainReport JSON") {
  TrainConfig c;
  c.base_lr = 0.05;
  c.seed = 9;
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.base_lr == 0.05);
  CHECK(back.seed == 9);
  CHECK_THROWS_AS(TrainConfig::from_json({{"base_lr", -1.0}}), Error);
  TrainReport r;
  r.regime = "moderate";
  r.epochs_run = 3;
  r.loss_curve = {1.0, 0.5, 0.25};
  r.attack_success_rate = 0.8;
  const auto rr = TrainReport::from_json(r.to_json());
  CHECK(rr.epochs_run == 3);
  CHECK(rr.attack_success_rate == 0.8);
}
