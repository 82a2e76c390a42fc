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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "bdlab/error.hpp"
#include "bdlab/model.hpp"
#include "oracles.hpp"

using namespace bdlab;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 10;
  c.embed_dim = 4;
  c.hidden = 3;
  return c;
}

ErrorCode code_of(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("init_params is deterministic and keeps PAD at zero") {
  const auto c = small_config();
  const auto a = init_params(c, 4);
  CHECK(a == init_params(c, 4));
  CHECK_FALSE(a == init_params(c, 5));
  for (std::size_t j = 0; j < c.embed_dim; ++j) {
    CHECK(a.embedding(0, j) == 0.0);
  }
  for (double v : a.w1.data) {
    CHECK(std::abs(v) <= 0.08);
  }
  for (double v : a.b1.data) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("zero network gives uniform predictions and ln 2 loss") {
  const auto p = ModelParams::zeros(small_config());
  const std::vector<TokenId> ids = {3, 4, 5};
  const auto z = forward(p, ids);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK(predict(p, ids) == 0);
  CHECK(cross_entropy(z, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const std::vector<Example> batch = {{{3, 4}, 1}, {{5}, 0}};
  const auto lg = loss_and_grads(p, batch);
  CHECK(lg.loss == doctest::Approx(0.693147).epsilon(1e-6));
  for (const Matrix* t : std::as_const(lg.grads).tensors()) {
    for (double v : t->data) {
      CHECK(v == 0.0);
    }
  }
}

TEST_CASE("forward pools the mean of embedding rows") {
  const auto p = init_params(small_config(), 9);
  const std::vector<TokenId> one = {7};
  const Matrix row = gather_rows(p, one);
  CHECK(forward_from_embeddings(p, row) == forward(p, one));
  const std::vector<TokenId> two = {5, 6};
  const auto a = forward_from_embeddings(p, gather_rows(p, two));
  const auto b = forward(p, two);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-15));
  // PAD does not count toward the mean.
  const std::vector<TokenId> padded = {5, 6, 0, 0};
  CHECK(forward(p, padded) == forward(p, two));
  const std::vector<TokenId> all_pad = {0, 0};
  CHECK_THROWS_AS(forward(p, all_pad), Error);
  const auto zeros = ModelParams::zeros(small_config());
  const auto z = forward_from_embeddings(zeros, Matrix(2, 4));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("cross_entropy is stable for large logits") {
  CHECK(cross_entropy({1000.0, 0.0}, 0) == doctest::Approx(0.0));
  CHECK(cross_entropy({1000.0, 0.0}, 1) == doctest::Approx(1000.0));
}

TEST_CASE("parameter gradients match finite differences") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto p = oracle::random_problem(100 + s);
    CHECK(oracle::param_grad_error(p) <= 1e-4);
  }
}

TEST_CASE("embedding-row gradients match finite differences") {
  auto p = oracle::random_problem(7);
  const std::vector<TokenId> clean = {2, 3, 4};
  const Matrix clean_rows = gather_rows(p.params, clean);
  Matrix trig(2, p.config.embed_dim);
  for (std::size_t i = 0; i < trig.data.size(); ++i) {
    trig.data[i] = 0.3 * static_cast<double>(i) - 0.5;
  }
  const auto analytic = loss_and_embed_grads(p.params, clean_rows, trig, 1);
  const auto numeric = oracle::central_diff(trig.data, [&] {
    return loss_and_embed_grads(p.params, clean_rows, trig, 1).loss;
  });
  CHECK(oracle::max_rel_error(analytic.grad.data, numeric) <= 1e-4);
}

TEST_CASE("model files round trip bit-exactly") {
  ModelFile f;
  f.config = small_config();
  f.params = init_params(f.config, 3);
  f.metadata = {{"regime", "moderate"}};
  const auto bytes = serialize_model(f);
  const auto back = deserialize_model(bytes);
  CHECK(back.params == f.params);
  CHECK(back.config == f.config);
  CHECK(back.metadata == f.metadata);
  CHECK(serialize_model(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "bdlab_test_model.bdm";
  save_model(f, path);
  CHECK(load_model(path).params == f.params);
  CHECK_THROWS_AS(load_model(path.string() + ".missing"), Error);
}

TEST_CASE("damaged model files give distinct errors") {
  ModelFile f;
  f.config = small_config();
  f.params = init_params(f.config, 3);
  const auto bytes = serialize_model(f);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  CHECK(code_of(truncated) == ErrorCode::kCorrupt);
  CHECK(code_of({bytes.begin(), bytes.begin() + 10}) == ErrorCode::kCorrupt);

  auto versioned = bytes;
  versioned[8] = 99;
  CHECK(code_of(versioned) == ErrorCode::kVersion);

  // Same-length edit of the header: config says V = 11, tensors say 10.
  auto reshaped = bytes;
  const std::string needle = "\"vocab_size\":10";
  auto it = std::search(reshaped.begin(), reshaped.end(), needle.begin(), needle.end());
  REQUIRE(it != reshaped.end());
  *(it + static_cast<std::ptrdiff_t>(needle.size()) - 1) = '1';
  CHECK(code_of(reshaped) == ErrorCode::kShape);
}
