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

// Reference implementations the library is checked against: central finite
// differences for every analytic gradient and an exhaustive stump search for
// the forest. Shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bdlab/corpus.hpp"
#include "bdlab/inversion.hpp"
#include "bdlab/meta.hpp"
#include "bdlab/model.hpp"
#include "bdlab/rng.hpp"

namespace oracle {

using bdlab::Matrix;

inline constexpr double kFdEps = 1e-5;

// |a - n| relative to the larger magnitude, with a floor so that entries
// that are zero on both sides do not divide by zero.
inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Central difference of f along every entry of x. x is restored afterwards.
inline std::vector<double> central_diff(std::vector<double>& x,
                                        const std::function<double()>& f,
                                        double eps = kFdEps) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f();
    x[i] = keep - eps;
    const double down = f();
    x[i] = keep;
    out[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

inline double max_rel_error(const std::vector<double>& analytic,
                            const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, rel_error(analytic[i], numeric[i]));
  }
  return worst;
}

// A random small problem for gradient checks.
struct GradProblem {
  bdlab::ModelConfig config;
  bdlab::ModelParams params;
  bdlab::Dataset data;
  int target = 1;
};

inline GradProblem random_problem(std::uint64_t seed) {
  bdlab::Rng rng(seed);
  GradProblem p;
  p.config.vocab_size = 6 + rng.below(10);
  p.config.embed_dim = 2 + rng.below(5);
  p.config.hidden = 2 + rng.below(5);
  p.config.max_len = 8 + rng.below(8);
  p.params = bdlab::init_params(p.config, bdlab::derive_seed(seed, 1));
  // Larger weights than the initializer so tanh is away from its linear part.
  const double scale = rng.uniform(1.0, 12.0);
  for (bdlab::Matrix* t : p.params.tensors()) {
    for (double& v : t->data) {
      v *= scale;
    }
  }
  for (std::size_t c = 0; c < p.config.embed_dim; ++c) {
    p.params.embedding(0, c) = 0.0;
  }
  for (double& v : p.params.b1.data) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.params.b2.data) v = rng.uniform(-0.5, 0.5);
  p.target = static_cast<int>(rng.below(2));
  const std::size_t n = 3 + rng.below(6);
  for (std::size_t i = 0; i < n; ++i) {
    bdlab::Example ex;
    const std::size_t len = 1 + rng.below(p.config.max_len);
    for (std::size_t k = 0; k < len; ++k) {
      ex.tokens.push_back(static_cast<bdlab::TokenId>(1 + rng.below(p.config.vocab_size - 1)));
    }
    // At least one example away from the target so inversion batches exist.
    ex.label = i == 0 ? 1 - p.target : static_cast<int>(rng.below(2));
    p.data.examples.push_back(std::move(ex));
  }
  p.data.name = "fd";
  return p;
}

// Worst relative error of loss_and_grads against finite differences.
inline double param_grad_error(GradProblem& p) {
  const auto analytic = bdlab::loss_and_grads(p.params, p.data.examples);
  double worst = 0.0;
  auto dst = p.params.tensors();
  const auto src = std::as_const(analytic.grads).tensors();
  for (std::size_t k = 0; k < bdlab::kNumTensors; ++k) {
    const auto numeric = central_diff(dst[k]->data, [&] {
      return bdlab::loss_and_grads(p.params, p.data.examples).loss;
    });
    worst = std::max(worst, max_rel_error(src[k]->data, numeric));
  }
  return worst;
}

// Worst relative error of trigger_rows_loss's gradient w.r.t. the rows.
inline double trigger_rows_grad_error(GradProblem& p, std::uint64_t seed) {
  bdlab::Rng rng(seed);
  const std::size_t len = 1 + rng.below(3);
  const auto batch = bdlab::sample_eval_batch(p.params, p.data, p.target, 8, seed,
                                              p.config.max_len);
  Matrix rows(len, p.config.embed_dim);
  for (double& v : rows.data) {
    v = rng.uniform(-1.0, 1.0);
  }
  Matrix grad;
  bdlab::trigger_rows_loss(p.params, batch, rows, p.target, &grad);
  const auto numeric = central_diff(rows.data, [&] {
    return bdlab::trigger_rows_loss(p.params, batch, rows, p.target);
  });
  return max_rel_error(grad.data, numeric);
}

// Worst relative error of inversion_loss's gradient w.r.t. the soft logits.
inline double soft_logit_grad_error(GradProblem& p, std::uint64_t seed) {
  bdlab::Rng rng(seed);
  const auto batch = bdlab::sample_eval_batch(p.params, p.data, p.target, 8, seed,
                                              p.config.max_len);
  bdlab::SoftTrigger trigger;
  trigger.logits = Matrix(1 + rng.below(3), p.config.vocab_size);
  for (double& v : trigger.logits.data) {
    v = rng.normal();
  }
  trigger.temperature = rng.uniform(0.3, 2.0);
  const auto analytic = bdlab::inversion_loss(p.params, batch, trigger, p.target);
  const auto numeric = central_diff(trigger.logits.data, [&] {
    return bdlab::inversion_loss(p.params, batch, trigger, p.target).loss;
  });
  return max_rel_error(analytic.grad.data, numeric);
}

// Exhaustive depth-1 search. Impurities are compared as exact rationals:
// n * weighted_gini = n - sum_side (c0^2 + c1^2) / n_side, so minimizing
// impurity maximizes S = sum_side (c0^2 + c1^2) / n_side.
struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  // S as numerator / denominator.
  std::int64_t num = 0;
  std::int64_t den = 1;
};

inline bool rational_less(std::int64_t an, std::int64_t ad, std::int64_t bn, std::int64_t bd) {
  return an * bd < bn * ad;
}

// Every optimal stump, or nothing when no split beats the parent node.
inline std::vector<Stump> optimal_stumps(const std::vector<std::vector<double>>& x,
                                         const std::vector<int>& y) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::int64_t c[2] = {0, 0};
  for (int label : y) {
    c[label]++;
  }
  std::vector<Stump> all;
  for (std::size_t f = 0; f < x.front().size(); ++f) {
    std::vector<double> values;
    for (const auto& row : x) {
      values.push_back(row[f]);
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = (values[i] + values[i + 1]) / 2.0;
      std::int64_t l[2] = {0, 0};
      std::int64_t r[2] = {0, 0};
      for (std::size_t s = 0; s < x.size(); ++s) {
        (x[s][f] <= t ? l : r)[y[s]]++;
      }
      const std::int64_t nl = l[0] + l[1];
      const std::int64_t nr = r[0] + r[1];
      all.push_back({f, t, (l[0] * l[0] + l[1] * l[1]) * nr + (r[0] * r[0] + r[1] * r[1]) * nl,
                     nl * nr});
    }
  }
  // Parent S = (c0^2 + c1^2) / n; a split must do strictly better.
  std::int64_t best_num = c[0] * c[0] + c[1] * c[1];
  std::int64_t best_den = n;
  bool improved = false;
  for (const auto& s : all) {
    if (rational_less(best_num, best_den, s.num, s.den)) {
      best_num = s.num;
      best_den = s.den;
      improved = true;
    }
  }
  std::vector<Stump> best;
  if (!improved) {
    return best;
  }
  for (const auto& s : all) {
    if (s.num * best_den == best_num * s.den) {
      best.push_back(s);
    }
  }
  return best;
}

// True when the tree root and the stump send the same points left.
inline bool same_partition(const std::vector<std::vector<double>>& x, const Stump& s,
                           int feature, double threshold) {
  if (feature != static_cast<int>(s.feature)) {
    return false;
  }
  for (const auto& row : x) {
    if ((row[s.feature] <= s.threshold) != (row[s.feature] <= threshold)) {
      return false;
    }
  }
  return true;
}

// Majority vote of the points on one side of a stump; ties go to 0.
inline int side_vote(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                     const Stump& s, bool left) {
  std::size_t c[2] = {0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i][s.feature] <= s.threshold) == left) {
      c[y[i]]++;
    }
  }
  return c[1] > c[0] ? 1 : 0;
}

}  // namespace oracle
