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

#include "bdlab/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bdlab/attack.hpp"
#include "bdlab/error.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"
#include "bdlab/training.hpp"

namespace bdlab {

namespace {

constexpr double kInitStd = 0.1;  // N(0, 0.01) read as a variance

// Sum of values in ascending order so the result ignores input order.
double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) {
    total += v;
  }
  return total;
}

Matrix clip_rows(const Matrix& rows, std::size_t keep) {
  if (rows.rows <= keep) {
    return rows;
  }
  Matrix out(keep, rows.cols);
  std::copy(rows.data.begin(), rows.data.begin() + static_cast<std::ptrdiff_t>(keep * rows.cols),
            out.data.begin());
  return out;
}

double temperature_at(const InversionConfig& c, std::size_t step) {
  if (c.steps <= 1) {
    return c.tau_end;
  }
  const double frac = static_cast<double>(step) / static_cast<double>(c.steps - 1);
  return c.tau_start * std::pow(c.tau_end / c.tau_start, frac);
}

std::vector<TokenId> discretize(const SoftTrigger& trigger) {
  const Matrix& z = trigger.logits;
  std::vector<TokenId> out(z.rows);
  for (std::size_t l = 0; l < z.rows; ++l) {
    std::size_t best = kPadId + 1;
    for (std::size_t v = best + 1; v < z.cols; ++v) {
      if (z(l, v) > z(l, best)) {
        best = v;
      }
    }
    out[l] = static_cast<TokenId>(best);
  }
  return out;
}

// Higher ASR wins, then lower loss; remaining ties keep the earlier entry.
bool better(double asr_a, double loss_a, double asr_b, double loss_b) {
  if (asr_a != asr_b) {
    return asr_a > asr_b;
  }
  return loss_a < loss_b;
}

}  // namespace

void InversionConfig::validate() const {
  require(trigger_len >= 1, "trigger_len must be >= 1");
  require(step_size > 0.0, "step_size must be positive");
  require(tau_end > 0.0 && tau_start >= tau_end,
          "temperatures must satisfy tau_start >= tau_end > 0");
  require(restarts >= 1, "restarts must be >= 1");
  require(dev_sample >= 1, "dev_sample must be >= 1");
  require(theta_asr >= 0.0 && theta_asr <= 1.0, "theta_asr must be in [0, 1]");
  require(theta_loss > 0.0, "theta_loss must be positive");
  require(max_len > trigger_len, "max_len must exceed trigger_len");
}

nlohmann::json InversionConfig::to_json() const {
  return {{"trigger_len", trigger_len}, {"steps", steps},
          {"step_size", step_size},     {"tau_start", tau_start},
          {"tau_end", tau_end},         {"restarts", restarts},
          {"dev_sample", dev_sample},   {"theta_asr", theta_asr},
          {"theta_loss", theta_loss},   {"max_len", max_len}};
}

InversionConfig InversionConfig::from_json(const nlohmann::json& j) {
  InversionConfig c;
  c.trigger_len = j.value("trigger_len", c.trigger_len);
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  c.tau_start = j.value("tau_start", c.tau_start);
  c.tau_end = j.value("tau_end", c.tau_end);
  c.restarts = j.value("restarts", c.restarts);
  c.dev_sample = j.value("dev_sample", c.dev_sample);
  c.theta_asr = j.value("theta_asr", c.theta_asr);
  c.theta_loss = j.value("theta_loss", c.theta_loss);
  c.max_len = j.value("max_len", c.max_len);
  c.validate();
  return c;
}

std::uint64_t eval_batch_seed(std::uint64_t seed, int target_label) {
  return derive_seed(seed, 0xba7c0u + static_cast<std::uint64_t>(target_label));
}

EvalBatch sample_eval_batch(const ModelParams& params, const Dataset& dev,
                            int target_label, std::size_t count,
                            std::uint64_t seed, std::size_t max_len) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (dev.examples[i].label != target_label) {
      pool.push_back(i);
    }
  }
  require(!pool.empty(),
          "dev set has no examples outside target label " + std::to_string(target_label),
          ErrorCode::kPrecondition);
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(std::min(pool.size(), count));
  std::sort(pool.begin(), pool.end());

  EvalBatch batch;
  batch.max_len = max_len;
  for (std::size_t i : pool) {
    batch.examples.push_back(dev.examples[i]);
    batch.rows.push_back(gather_rows(params, dev.examples[i].tokens));
  }
  return batch;
}

double trigger_rows_loss(const ModelParams& params, const EvalBatch& batch,
                         const Matrix& trigger_rows, int target_label,
                         Matrix* grad) {
  require(!batch.examples.empty(), "evaluation batch is empty");
  require(trigger_rows.rows < batch.max_len, "trigger does not fit in max_len");
  const std::size_t keep = batch.max_len - trigger_rows.rows;
  const double scale = 1.0 / static_cast<double>(batch.examples.size());
  std::vector<double> losses;
  losses.reserve(batch.examples.size());
  if (grad != nullptr) {
    *grad = Matrix(trigger_rows.rows, trigger_rows.cols);
  }
  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    require(batch.examples[i].label != target_label,
            "evaluation batch contains a target-label example",
            ErrorCode::kPrecondition);
    const Matrix clean = clip_rows(batch.rows[i], keep);
    auto lg = loss_and_embed_grads(params, clean, trigger_rows, target_label);
    losses.push_back(lg.loss);
    if (grad != nullptr) {
      for (std::size_t k = 0; k < grad->data.size(); ++k) {
        grad->data[k] += scale * lg.grad.data[k];
      }
    }
  }
  return scale * sorted_sum(std::move(losses));
}

Matrix soft_weights(const SoftTrigger& trigger) {
  require(trigger.temperature > 0.0, "temperature must be positive");
  const Matrix& z = trigger.logits;
  require(z.cols >= 2, "soft trigger needs a non-PAD column");
  Matrix w(z.rows, z.cols);
  for (std::size_t l = 0; l < z.rows; ++l) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t v = kPadId + 1; v < z.cols; ++v) {
      m = std::max(m, z(l, v) / trigger.temperature);
    }
    double total = 0.0;
    for (std::size_t v = kPadId + 1; v < z.cols; ++v) {
      w(l, v) = std::exp(z(l, v) / trigger.temperature - m);
      total += w(l, v);
    }
    for (std::size_t v = kPadId + 1; v < z.cols; ++v) {
      w(l, v) /= total;
    }
  }
  return w;
}

Matrix soft_embed(const SoftTrigger& trigger, const Matrix& embedding) {
  require(trigger.logits.cols == embedding.rows,
          "soft trigger width does not match vocabulary", ErrorCode::kShape);
  const Matrix w = soft_weights(trigger);
  Matrix rows(w.rows, embedding.cols);
  for (std::size_t l = 0; l < w.rows; ++l) {
    for (std::size_t v = kPadId + 1; v < w.cols; ++v) {
      const double p = w(l, v);
      const auto e = embedding.row(v);
      for (std::size_t k = 0; k < embedding.cols; ++k) {
        rows(l, k) += p * e[k];
      }
    }
  }
  return rows;
}

InversionLoss inversion_loss(const ModelParams& params, const EvalBatch& batch,
                             const SoftTrigger& trigger, int target_label) {
  const Matrix& emb = params.embedding;
  const Matrix w = soft_weights(trigger);
  const Matrix rows = soft_embed(trigger, emb);
  Matrix d_rows;
  InversionLoss out;
  out.loss = trigger_rows_loss(params, batch, rows, target_label, &d_rows);
  out.grad = Matrix(w.rows, w.cols);
  // d rows_l / d w_lv = E_v, then back through the tempered softmax.
  std::vector<double> d_w(w.cols);
  for (std::size_t l = 0; l < w.rows; ++l) {
    double mean = 0.0;
    for (std::size_t v = kPadId + 1; v < w.cols; ++v) {
      const auto e = emb.row(v);
      double g = 0.0;
      for (std::size_t k = 0; k < emb.cols; ++k) {
        g += d_rows(l, k) * e[k];
      }
      d_w[v] = g;
      mean += w(l, v) * g;
    }
    for (std::size_t v = kPadId + 1; v < w.cols; ++v) {
      out.grad(l, v) = w(l, v) * (d_w[v] - mean) / trigger.temperature;
    }
  }
  return out;
}

HardEval evaluate_hard_trigger(const ModelParams& params, const EvalBatch& batch,
                               const std::vector<TokenId>& tokens,
                               int target_label) {
  TriggerSpec spec;
  spec.kind = tokens.size() == 1 ? TriggerKind::kWord : TriggerKind::kSentence;
  spec.tokens = tokens;
  spec.target_label = target_label;
  spec.insert_policy = InsertPolicy::kPrefix;
  Dataset plain;
  plain.examples = batch.examples;
  Rng unused(0);
  const Dataset triggered = make_triggered_eval(plain, spec, unused, batch.max_len);
  HardEval out;
  out.asr = attack_success_rate(params, triggered, target_label);
  out.loss = trigger_rows_loss(params, batch, gather_rows(params, tokens), target_label);
  return out;
}

TargetRecord invert_for_target(const ModelParams& params, const Dataset& dev,
                               int target_label, const InversionConfig& config,
                               std::uint64_t seed) {
  config.validate();
  const EvalBatch batch =
      sample_eval_batch(params, dev, target_label, config.dev_sample,
                        eval_batch_seed(seed, target_label), config.max_len);
  const std::size_t vocab = params.embedding.rows;
  require(vocab >= 2, "vocabulary too small for inversion");

  std::vector<TargetRecord> runs(config.restarts);
  parallel_for(config.restarts, [&](std::size_t r) {
    Rng rng(derive_seed(seed, 0x1e7000u + 0x100u * static_cast<std::uint64_t>(target_label) + r));
    SoftTrigger trigger;
    trigger.logits = Matrix(config.trigger_len, vocab);
    for (double& v : trigger.logits.data) {
      v = kInitStd * rng.normal();
    }
    double soft_loss = 0.0;
    for (std::size_t step = 0; step < config.steps; ++step) {
      trigger.temperature = temperature_at(config, step);
      const auto il = inversion_loss(params, batch, trigger, target_label);
      soft_loss = il.loss;
      for (std::size_t k = 0; k < il.grad.data.size(); ++k) {
        trigger.logits.data[k] -= config.step_size * il.grad.data[k];
      }
    }
    trigger.temperature = config.tau_end;
    if (config.steps == 0) {
      soft_loss = inversion_loss(params, batch, trigger, target_label).loss;
    }
    TargetRecord rec;
    rec.target_label = target_label;
    rec.best_tokens = discretize(trigger);
    rec.soft_loss = soft_loss;
    rec.restart = r;
    const auto hard = evaluate_hard_trigger(params, batch, rec.best_tokens, target_label);
    rec.hard_asr = hard.asr;
    rec.hard_loss = hard.loss;
    runs[r] = std::move(rec);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (better(runs[r].hard_asr, runs[r].hard_loss, runs[best].hard_asr,
               runs[best].hard_loss)) {
      best = r;
    }
  }
  return runs[best];
}

bool inversion_rule(const TargetRecord& record, const InversionConfig& config) {
  return record.hard_asr >= config.theta_asr && record.hard_loss <= config.theta_loss;
}

InversionVerdict detect_inversion(const ModelParams& params, const Dataset& dev,
                                  const InversionConfig& config,
                                  std::uint64_t seed) {
  const auto counts = dev.label_counts();
  require(counts[0] > 0 && counts[1] > 0, "dev set must contain both classes",
          ErrorCode::kPrecondition);
  InversionVerdict verdict;
  for (int target = 0; target < kNumClasses; ++target) {
    verdict.per_target.push_back(invert_for_target(params, dev, target, config, seed));
  }
  // Evidence: among records that pass the rule (or all of them when none
  // does), the strongest by ASR then loss.
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < verdict.per_target.size(); ++i) {
    const auto& rec = verdict.per_target[i];
    const bool pass = inversion_rule(rec, config);
    verdict.backdoored = verdict.backdoored || pass;
    if (!pick) {
      pick = i;
      continue;
    }
    const auto& cur = verdict.per_target[*pick];
    const bool cur_pass = inversion_rule(cur, config);
    if ((pass && !cur_pass) ||
        (pass == cur_pass && better(rec.hard_asr, rec.hard_loss, cur.hard_asr, cur.hard_loss))) {
      pick = i;
    }
  }
  verdict.evidence = verdict.per_target[*pick];
  return verdict;
}

namespace {

nlohmann::json record_json(const TargetRecord& r, const Vocab* vocab) {
  nlohmann::json j = {{"target_label", r.target_label},
                      {"best_tokens", r.best_tokens},
                      {"soft_loss", r.soft_loss},
                      {"hard_asr", r.hard_asr},
                      {"hard_loss", r.hard_loss},
                      {"restart", r.restart}};
  if (vocab != nullptr) {
    std::vector<std::string> words;
    for (TokenId t : r.best_tokens) {
      words.push_back(t < vocab->size() ? vocab->token(t) : std::string(kUnkToken));
    }
    j["best_words"] = words;
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const InversionVerdict& verdict, const Vocab* vocab) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : verdict.per_target) {
    per.push_back(record_json(r, vocab));
  }
  return {{"detector", "inversion"},
          {"backdoored", verdict.backdoored},
          {"per_target", per},
          {"evidence", record_json(verdict.evidence, vocab)}};
}

}  // namespace bdlab
