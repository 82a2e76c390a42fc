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
#include <sstream>
#include <string>

#include "doctest.h"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/error.hpp"
#include "bdlab/inversion.hpp"
#include "bdlab/landscape.hpp"

using namespace bdlab;

namespace {

const DatasetSplit& synthetic() {
  static const DatasetSplit s = split(generate_synthetic(1000, 64, 7), {}, 7);
  return s;
}

ModelConfig config64() {
  ModelConfig c;
  c.vocab_size = 64;
  return c;
}

TriggerSpec cf() {
  return make_trigger(synthetic_vocab(64), TriggerKind::kWord, {"cf"});
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("directions are deterministic, orthogonal and scaled") {
  const auto p = init_params(config64(), 1);
  const auto a = make_directions(3, 16, p.embedding, 9);
  const auto b = make_directions(3, 16, p.embedding, 9);
  CHECK(a.d1 == b.d1);
  CHECK(a.d2 == b.d2);
  CHECK_FALSE(make_directions(3, 16, p.embedding, 10).d1 == a.d1);
  const double scale = mean_row_norm(p.embedding);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(std::abs(dot(a.d1.row(l), a.d2.row(l))) < 1e-12);
    CHECK(std::sqrt(dot(a.d1.row(l), a.d1.row(l))) == doctest::Approx(scale).epsilon(1e-12));
    CHECK(std::sqrt(dot(a.d2.row(l), a.d2.row(l))) == doctest::Approx(scale).epsilon(1e-12));
  }
  CHECK(std::abs(dot(a.d1.data, a.d2.data)) < 1e-12);
}

TEST_CASE("mean_row_norm skips PAD") {
  Matrix e(3, 2);
  e(1, 0) = 3.0;
  e(1, 1) = 4.0;
  e(2, 0) = 1.0;
  CHECK(mean_row_norm(e) == doctest::Approx(3.0));
}

TEST_CASE("zero offset equals the ground-truth trigger loss") {
  const auto p = init_params(config64(), 2);
  const auto t = cf();
  const auto& dev = synthetic().dev;
  const auto batch = sample_eval_batch(p, dev, t.target_label, 64,
                                       eval_batch_seed(5, t.target_label), 32);
  const auto dirs = make_directions(1, 16, p.embedding, 5);
  const Matrix rows = gather_rows(p, t.tokens);
  const double at_zero = loss_at_offset(p, batch, rows, dirs, 0.0, 0.0, t.target_label);
  CHECK(at_zero == trigger_rows_loss(p, batch, rows, t.target_label));
  CHECK(at_zero == ground_truth_loss(p, dev, t, 64, 5, 32));
}

TEST_CASE("zero network is flat at ln 2") {
  const auto p = ModelParams::zeros(config64());
  ContourSpec spec;
  spec.resolution = 2;
  const auto g = contour_grid(p, cf(), synthetic().dev, spec);
  for (double v : g.losses.data) {
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("default grid is 41 x 41 with the exact centre") {
  const auto p = init_params(config64(), 3);
  ContourSpec spec;
  spec.seed = 4;
  const auto g = contour_grid(p, cf(), synthetic().dev, spec);
  CHECK(g.alphas.size() == 41);
  CHECK(g.betas.size() == 41);
  CHECK(g.alphas[20] == 0.0);
  CHECK(g.betas.front() == -spec.alpha_max);
  CHECK(g.losses(20, 20) == g.center_loss);
  CHECK(g.center_loss == ground_truth_loss(p, synthetic().dev, cf(), spec.dev_sample, 4, 32));

  const std::string csv = contour_csv(g);
  std::istringstream in(csv);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 42);
  CHECK(csv.rfind("alpha\\beta,", 0) == 0);
  const auto side = contour_sidecar(g, spec, cf());
  CHECK(side.at("center_loss") == g.center_loss);

  const auto again = contour_grid(p, cf(), synthetic().dev, spec);
  CHECK(again.losses == g.losses);
}

TEST_CASE("contour spec validation") {
  CHECK_THROWS_AS(ContourSpec::from_json({{"resolution", 0}}), Error);
  CHECK_THROWS_AS(ContourSpec::from_json({{"alpha_max", -1.0}}), Error);
  CHECK(ContourSpec::from_json(ContourSpec{}.to_json()).resolution == 20);
}
