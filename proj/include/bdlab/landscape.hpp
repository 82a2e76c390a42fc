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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdlab/attack.hpp"
#include "bdlab/inversion.hpp"
#include "bdlab/model.hpp"

namespace bdlab {

struct ContourSpec {
  double alpha_max = 2.0;   // in units of the direction scale
  std::size_t resolution = 20;  // grid is (2r+1) x (2r+1)
  std::size_t dev_sample = 64;
  std::uint64_t seed = 0;
  std::size_t max_len = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static ContourSpec from_json(const nlohmann::json& j);
};

struct Directions {
  Matrix d1;  // L x d
  Matrix d2;
  std::uint64_t draw_seed = 0;  // sub-seed that produced the accepted draw
};

struct ContourGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
  Matrix losses;  // alphas.size() x betas.size()
  double center_loss = 0.0;
  std::array<double, 2> direction_norms{};
  std::uint64_t direction_seed = 0;
};

/// Two standard-normal L x d directions. Row l of d2 is orthogonalized
/// against row l of d1, then every row of both is rescaled to the mean norm
/// of the non-PAD rows of E. Orthogonal rows make the flattened vectors
/// orthogonal too. Near-parallel draws are redrawn with the next sub-seed.
Directions make_directions(std::size_t trigger_len, std::size_t embed_dim,
                           const Matrix& embedding, std::uint64_t seed);

/// Mean non-PAD row norm of the embedding table.
double mean_row_norm(const Matrix& embedding);

/// Trigger-loss with rows T + alpha*D1 + beta*D2 appended to every example.
double loss_at_offset(const ModelParams& params, const EvalBatch& batch,
                      const Matrix& trigger_rows, const Directions& dirs,
                      double alpha, double beta, int target_label);

/// Loss at the ground-truth trigger on the batch the detector would use for
/// the same seed. This is the centre value of contour_grid.
double ground_truth_loss(const ModelParams& params, const Dataset& dev,
                         const TriggerSpec& trigger, std::size_t dev_sample,
                         std::uint64_t seed, std::size_t max_len);

ContourGrid contour_grid(const ModelParams& params, const TriggerSpec& trigger,
                         const Dataset& dev, const ContourSpec& spec);

/// First row: "alpha\\beta" then the betas; each further row: alpha then the
/// losses. Values are printed with 17 significant digits.
std::string contour_csv(const ContourGrid& grid);

/// Sidecar for plotting tools.
nlohmann::json contour_sidecar(const ContourGrid& grid, const ContourSpec& spec,
                               const TriggerSpec& trigger);

}  // namespace bdlab
