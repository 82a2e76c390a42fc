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

#include "bdlab/landscape.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "bdlab/error.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

constexpr std::size_t kMaxRedraws = 64;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

}  // namespace

void ContourSpec::validate() const {
  require(alpha_max > 0.0 && std::isfinite(alpha_max), "alpha_max must be positive");
  require(resolution >= 1, "resolution must be >= 1 (grid >= 3x3)");
  require(dev_sample >= 1, "dev_sample must be >= 1");
}

nlohmann::json ContourSpec::to_json() const {
  return {{"alpha_max", alpha_max}, {"resolution", resolution},
          {"dev_sample", dev_sample}, {"seed", seed}, {"max_len", max_len}};
}

ContourSpec ContourSpec::from_json(const nlohmann::json& j) {
  ContourSpec s;
  s.alpha_max = j.value("alpha_max", s.alpha_max);
  s.resolution = j.value("resolution", s.resolution);
  s.dev_sample = j.value("dev_sample", s.dev_sample);
  s.seed = j.value("seed", s.seed);
  s.max_len = j.value("max_len", s.max_len);
  s.validate();
  return s;
}

double mean_row_norm(const Matrix& embedding) {
  require(embedding.rows >= 2, "embedding has no non-PAD rows");
  double total = 0.0;
  for (std::size_t r = kPadId + 1; r < embedding.rows; ++r) {
    const auto row = embedding.row(r);
    total += std::sqrt(dot(row, row));
  }
  return total / static_cast<double>(embedding.rows - 1);
}

Directions make_directions(std::size_t trigger_len, std::size_t embed_dim,
                           const Matrix& embedding, std::uint64_t seed) {
  require(trigger_len >= 1 && embed_dim >= 1, "directions need L, d >= 1");
  require(embedding.cols == embed_dim, "embedding width mismatch", ErrorCode::kShape);
  const double scale = mean_row_norm(embedding);
  for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const std::uint64_t sub = derive_seed(seed, 0xd1e0u + attempt);
    Rng rng(sub);
    Directions dirs;
    dirs.draw_seed = sub;
    dirs.d1 = Matrix(trigger_len, embed_dim);
    dirs.d2 = Matrix(trigger_len, embed_dim);
    for (double& v : dirs.d1.data) v = rng.normal();
    for (double& v : dirs.d2.data) v = rng.normal();
    bool degenerate = false;
    for (std::size_t l = 0; l < trigger_len && !degenerate; ++l) {
      auto a = dirs.d1.row(l);
      auto b = dirs.d2.row(l);
      const double aa = dot(a, a);
      const double before = std::sqrt(dot(b, b));
      if (aa < 1e-12) {
        degenerate = true;
        break;
      }
      const double proj = dot(a, b) / aa;
      for (std::size_t k = 0; k < embed_dim; ++k) {
        b[k] -= proj * a[k];
      }
      const double after = std::sqrt(dot(b, b));
      degenerate = after < 1e-6 * before || after == 0.0;
      if (degenerate) {
        break;
      }
      const double na = std::sqrt(aa);
      for (std::size_t k = 0; k < embed_dim; ++k) {
        a[k] *= scale / na;
        b[k] *= scale / after;
      }
    }
    if (!degenerate) {
      return dirs;
    }
  }
  fail(ErrorCode::kInternal, "could not draw non-degenerate directions");
}

double loss_at_offset(const ModelParams& params, const EvalBatch& batch,
                      const Matrix& trigger_rows, const Directions& dirs,
                      double alpha, double beta, int target_label) {
  require(dirs.d1.rows == trigger_rows.rows && dirs.d1.cols == trigger_rows.cols &&
              dirs.d2.rows == trigger_rows.rows && dirs.d2.cols == trigger_rows.cols,
          "direction shape does not match trigger rows", ErrorCode::kShape);
  Matrix rows = trigger_rows;
  for (std::size_t i = 0; i < rows.data.size(); ++i) {
    rows.data[i] += alpha * dirs.d1.data[i] + beta * dirs.d2.data[i];
  }
  return trigger_rows_loss(params, batch, rows, target_label);
}

double ground_truth_loss(const ModelParams& params, const Dataset& dev,
                         const TriggerSpec& trigger, std::size_t dev_sample,
                         std::uint64_t seed, std::size_t max_len) {
  trigger.validate(params.embedding.rows);
  const EvalBatch batch = sample_eval_batch(params, dev, trigger.target_label, dev_sample,
                                            eval_batch_seed(seed, trigger.target_label),
                                            max_len);
  return trigger_rows_loss(params, batch, gather_rows(params, trigger.tokens),
                           trigger.target_label);
}

ContourGrid contour_grid(const ModelParams& params, const TriggerSpec& trigger,
                         const Dataset& dev, const ContourSpec& spec) {
  spec.validate();
  trigger.validate(params.embedding.rows);
  const int target = trigger.target_label;
  const EvalBatch batch = sample_eval_batch(params, dev, target, spec.dev_sample,
                                            eval_batch_seed(spec.seed, target),
                                            spec.max_len);
  const Matrix rows = gather_rows(params, trigger.tokens);
  const Directions dirs = make_directions(rows.rows, rows.cols, params.embedding, spec.seed);

  const std::size_t n = 2 * spec.resolution + 1;
  ContourGrid grid;
  grid.alphas.resize(n);
  grid.betas.resize(n);
  const double r = static_cast<double>(spec.resolution);
  for (std::size_t i = 0; i < n; ++i) {
    // The centre index maps to exactly 0.
    const double c = (static_cast<double>(i) - r) / r;
    grid.alphas[i] = c * spec.alpha_max;
    grid.betas[i] = c * spec.alpha_max;
  }
  grid.losses = Matrix(n, n);
  parallel_for(n * n, [&](std::size_t cell) {
    const std::size_t i = cell / n;
    const std::size_t j = cell % n;
    grid.losses(i, j) = loss_at_offset(params, batch, rows, dirs, grid.alphas[i],
                                       grid.betas[j], target);
  });
  grid.center_loss = trigger_rows_loss(params, batch, rows, target);
  const double n1 = std::sqrt(dot(dirs.d1.data, dirs.d1.data));
  const double n2 = std::sqrt(dot(dirs.d2.data, dirs.d2.data));
  grid.direction_norms = {n1, n2};
  grid.direction_seed = dirs.draw_seed;
  return grid;
}

std::string contour_csv(const ContourGrid& grid) {
  std::ostringstream out;
  out << "alpha\\beta";
  for (double b : grid.betas) {
    out << ',' << fmt(b);
  }
  out << '\n';
  for (std::size_t i = 0; i < grid.alphas.size(); ++i) {
    out << fmt(grid.alphas[i]);
    for (std::size_t j = 0; j < grid.betas.size(); ++j) {
      out << ',' << fmt(grid.losses(i, j));
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json contour_sidecar(const ContourGrid& grid, const ContourSpec& spec,
                               const TriggerSpec& trigger) {
  return {{"center_loss", grid.center_loss},
          {"direction_seed", grid.direction_seed},
          {"direction_norms", grid.direction_norms},
          {"rows", grid.alphas.size()},
          {"cols", grid.betas.size()},
          {"target_label", trigger.target_label},
          {"trigger_tokens", trigger.tokens},
          {"spec", spec.to_json()}};
}

}  // namespace bdlab
