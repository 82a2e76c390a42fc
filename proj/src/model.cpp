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

#include "bdlab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bdlab/error.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

constexpr char kMagic[8] = {'B', 'D', 'L', 'M', 'O', 'D', 'E', 'L'};
constexpr double kInitScale = 0.08;

struct HeadActivations {
  std::vector<double> hidden;  // tanh output
  Logits logits{};
};

HeadActivations run_head(const ModelParams& p, std::span<const double> pooled) {
  const std::size_t h = p.w1.rows;
  const std::size_t d = p.w1.cols;
  HeadActivations act;
  act.hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    double z = p.b1.data[i];
    const auto w = p.w1.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      z += w[k] * pooled[k];
    }
    act.hidden[i] = std::tanh(z);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double z = p.b2.data[c];
    const auto w = p.w2.row(c);
    for (std::size_t i = 0; i < h; ++i) {
      z += w[i] * act.hidden[i];
    }
    act.logits[c] = z;
  }
  return act;
}

std::array<double, kNumClasses> softmax(const Logits& z) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

// Backpropagates scale * CE through the head. Accumulates into grads (when
// non-null) and writes d loss / d pooled (unscaled by the pooling divisor).
double backprop_head(const ModelParams& p, std::span<const double> pooled,
                     int label, double scale, Gradients* grads,
                     std::span<double> d_pooled) {
  const auto act = run_head(p, pooled);
  const double loss = cross_entropy(act.logits, label);
  const auto prob = softmax(act.logits);
  const std::size_t h = p.w1.rows;
  const std::size_t d = p.w1.cols;

  std::array<double, kNumClasses> d_logits{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    d_logits[c] = scale * (prob[c] - (static_cast<int>(c) == label ? 1.0 : 0.0));
  }
  std::vector<double> d_pre(h);
  for (std::size_t i = 0; i < h; ++i) {
    double da = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      da += p.w2(c, i) * d_logits[c];
    }
    d_pre[i] = da * (1.0 - act.hidden[i] * act.hidden[i]);
  }
  if (grads != nullptr) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      grads->b2.data[c] += d_logits[c];
      auto g = grads->w2.row(c);
      for (std::size_t i = 0; i < h; ++i) {
        g[i] += d_logits[c] * act.hidden[i];
      }
    }
    for (std::size_t i = 0; i < h; ++i) {
      grads->b1.data[i] += d_pre[i];
      auto g = grads->w1.row(i);
      for (std::size_t k = 0; k < d; ++k) {
        g[k] += d_pre[i] * pooled[k];
      }
    }
  }
  std::fill(d_pooled.begin(), d_pooled.end(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const auto w = p.w1.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      d_pooled[k] += w[k] * d_pre[i];
    }
  }
  return loss;
}

// Mean of the non-PAD embedding rows; returns the number of rows pooled.
std::size_t pool_tokens(const ModelParams& p, std::span<const TokenId> ids,
                        std::vector<double>& pooled) {
  const std::size_t d = p.embedding.cols;
  pooled.assign(d, 0.0);
  std::size_t count = 0;
  for (TokenId t : ids) {
    require(t < p.embedding.rows, "token id outside model vocabulary",
            ErrorCode::kShape);
    if (t == kPadId) {
      continue;
    }
    const auto row = p.embedding.row(t);
    for (std::size_t k = 0; k < d; ++k) {
      pooled[k] += row[k];
    }
    ++count;
  }
  require(count > 0, "input has no non-PAD tokens");
  for (double& v : pooled) {
    v /= static_cast<double>(count);
  }
  return count;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset,
                     std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  }
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},         {"num_classes", c.num_classes},
          {"max_len", c.max_len}};
}

std::array<std::size_t, 2> expected_shape(const ModelConfig& c, std::size_t k) {
  switch (k) {
    case 0: return {c.vocab_size, c.embed_dim};
    case 1: return {c.hidden, c.embed_dim};
    case 2: return {c.hidden, 1};
    case 3: return {c.num_classes, c.hidden};
    default: return {c.num_classes, 1};
  }
}

}  // namespace

void ModelConfig::validate() const {
  require(vocab_size >= 3, "model vocab_size must be >= 3");
  require(embed_dim >= 2, "model embed_dim must be >= 2");
  require(hidden >= 2, "model hidden size must be >= 2");
  require(num_classes == kNumClasses, "model must have exactly 2 classes");
  require(max_len >= 2, "model max_len must be >= 2");
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
  ModelParams p;
  p.embedding = Matrix(c.vocab_size, c.embed_dim);
  p.w1 = Matrix(c.hidden, c.embed_dim);
  p.b1 = Matrix(c.hidden, 1);
  p.w2 = Matrix(c.num_classes, c.hidden);
  p.b2 = Matrix(c.num_classes, 1);
  return p;
}

void ModelParams::validate(const ModelConfig& c) const {
  const auto ts = tensors();
  for (std::size_t k = 0; k < kNumTensors; ++k) {
    const auto shape = expected_shape(c, k);
    require(ts[k]->rows == shape[0] && ts[k]->cols == shape[1] &&
                ts[k]->data.size() == shape[0] * shape[1],
            "tensor " + std::string(kTensorNames[k]) + " does not match config",
            ErrorCode::kShape);
    require(std::all_of(ts[k]->data.begin(), ts[k]->data.end(),
                        [](double v) { return std::isfinite(v); }),
            "tensor " + std::string(kTensorNames[k]) + " has non-finite entries");
  }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p = ModelParams::zeros(config);
  Rng rng(derive_seed(seed, 0x1417u));
  for (Matrix* m : {&p.embedding, &p.w1, &p.w2}) {
    for (double& v : m->data) {
      v = rng.uniform(-kInitScale, kInitScale);
    }
  }
  std::fill(p.embedding.row(kPadId).begin(), p.embedding.row(kPadId).end(), 0.0);
  return p;
}

Logits forward(const ModelParams& params, std::span<const TokenId> token_ids) {
  require(!token_ids.empty(), "forward needs at least one token");
  std::vector<double> pooled;
  pool_tokens(params, token_ids, pooled);
  return run_head(params, pooled).logits;
}

Logits forward_from_embeddings(const ModelParams& params, const Matrix& rows) {
  require(rows.rows >= 1, "forward_from_embeddings needs at least one row");
  require(rows.cols == params.embedding.cols, "embedding width mismatch",
          ErrorCode::kShape);
  std::vector<double> pooled(rows.cols, 0.0);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    for (std::size_t k = 0; k < rows.cols; ++k) {
      pooled[k] += rows(r, k);
    }
  }
  for (double& v : pooled) {
    v /= static_cast<double>(rows.rows);
  }
  return run_head(params, pooled).logits;
}

int predict(const ModelParams& params, std::span<const TokenId> token_ids) {
  const auto z = forward(params, token_ids);
  return z[1] > z[0] ? 1 : 0;
}

double cross_entropy(const Logits& z, int label) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[static_cast<std::size_t>(label)];
}

double pooled_loss_and_grad(const ModelParams& params,
                            std::span<const double> pooled, int label,
                            std::span<double> d_pooled) {
  return backprop_head(params, pooled, label, 1.0, nullptr, d_pooled);
}

LossAndGrads loss_and_grads(const ModelParams& params,
                            std::span<const Example> batch) {
  require(!batch.empty(), "loss_and_grads needs a non-empty batch");
  const std::size_t d = params.embedding.cols;
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossAndGrads out;
  out.grads.embedding = Matrix(params.embedding.rows, d);
  out.grads.w1 = Matrix(params.w1.rows, params.w1.cols);
  out.grads.b1 = Matrix(params.b1.rows, 1);
  out.grads.w2 = Matrix(params.w2.rows, params.w2.cols);
  out.grads.b2 = Matrix(params.b2.rows, 1);

  std::vector<double> pooled;
  std::vector<double> d_pooled(d);
  for (const auto& ex : batch) {
    const std::size_t count = pool_tokens(params, ex.tokens, pooled);
    out.loss += scale * backprop_head(params, pooled, ex.label, scale,
                                      &out.grads, d_pooled);
    const double share = 1.0 / static_cast<double>(count);
    for (TokenId t : ex.tokens) {
      if (t == kPadId) {
        continue;
      }
      auto g = out.grads.embedding.row(t);
      for (std::size_t k = 0; k < d; ++k) {
        g[k] += share * d_pooled[k];
      }
    }
  }
  auto pad = out.grads.embedding.row(kPadId);
  std::fill(pad.begin(), pad.end(), 0.0);
  return out;
}

EmbedLossAndGrad loss_and_embed_grads(const ModelParams& params,
                                      const Matrix& clean_rows,
                                      const Matrix& trigger_rows, int label) {
  const std::size_t d = params.embedding.cols;
  require(clean_rows.cols == d && trigger_rows.cols == d,
          "embedding width mismatch", ErrorCode::kShape);
  const std::size_t n = clean_rows.rows + trigger_rows.rows;
  require(n >= 1, "no rows to pool");
  std::vector<double> pooled(d, 0.0);
  for (const Matrix* m : {&clean_rows, &trigger_rows}) {
    for (std::size_t r = 0; r < m->rows; ++r) {
      for (std::size_t k = 0; k < d; ++k) {
        pooled[k] += (*m)(r, k);
      }
    }
  }
  for (double& v : pooled) {
    v /= static_cast<double>(n);
  }
  std::vector<double> d_pooled(d);
  EmbedLossAndGrad out;
  out.loss = backprop_head(params, pooled, label, 1.0, nullptr, d_pooled);
  out.grad = Matrix(trigger_rows.rows, d);
  for (std::size_t r = 0; r < trigger_rows.rows; ++r) {
    for (std::size_t k = 0; k < d; ++k) {
      out.grad(r, k) = d_pooled[k] / static_cast<double>(n);
    }
  }
  return out;
}

Matrix gather_rows(const ModelParams& params, std::span<const TokenId> token_ids) {
  const std::size_t d = params.embedding.cols;
  Matrix rows(token_ids.size(), d);
  for (std::size_t r = 0; r < token_ids.size(); ++r) {
    require(token_ids[r] < params.embedding.rows,
            "token id outside model vocabulary", ErrorCode::kShape);
    const auto src = params.embedding.row(token_ids[r]);
    std::copy(src.begin(), src.end(), rows.row(r).begin());
  }
  return rows;
}

std::vector<std::uint8_t> serialize_model(const ModelFile& file) {
  file.config.validate();
  file.params.validate(file.config);

  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  const auto ts = file.params.tensors();
  for (std::size_t k = 0; k < kNumTensors; ++k) {
    const std::uint64_t nbytes = ts[k]->data.size() * sizeof(double);
    manifest.push_back({{"name", kTensorNames[k]},
                        {"shape", {ts[k]->rows, ts[k]->cols}},
                        {"offset", offset},
                        {"bytes", nbytes}});
    offset += nbytes;
  }
  const nlohmann::json header = {{"format", "bdlab-model"},
                                 {"format_version", kModelFormatVersion},
                                 {"config", config_to_json(file.config)},
                                 {"metadata", file.metadata},
                                 {"tensors", manifest},
                                 {"data_bytes", offset}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Matrix* m : ts) {
    for (double v : m->data) {
      put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

ModelFile deserialize_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kPrefix = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kPrefix ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kCorrupt, "not a bdlab model file (bad magic or truncated)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (version != kModelFormatVersion) {
    fail(ErrorCode::kVersion, "unsupported model format version " +
                                  std::to_string(version) + " (expected " +
                                  std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint64_t header_len = get_le(bytes, 12, 8);
  if (header_len > bytes.size() - kPrefix) {
    fail(ErrorCode::kCorrupt, "model header is truncated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefix,
                                   bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("model header is not valid JSON: ") + e.what());
  }

  ModelFile file;
  const std::size_t data_begin = kPrefix + header_len;
  try {
    if (header.at("format_version").get<std::uint32_t>() != kModelFormatVersion) {
      fail(ErrorCode::kVersion, "model header format_version mismatch");
    }
    const auto& c = header.at("config");
    file.config.vocab_size = c.at("vocab_size").get<std::size_t>();
    file.config.embed_dim = c.at("embed_dim").get<std::size_t>();
    file.config.hidden = c.at("hidden").get<std::size_t>();
    file.config.num_classes = c.at("num_classes").get<std::size_t>();
    file.config.max_len = c.at("max_len").get<std::size_t>();
    file.metadata = header.at("metadata");
    const auto& manifest = header.at("tensors");
    if (!manifest.is_array() || manifest.size() != kNumTensors) {
      fail(ErrorCode::kShape, "model manifest must list 5 tensors");
    }
    auto ts = file.params.tensors();
    for (std::size_t k = 0; k < kNumTensors; ++k) {
      const auto& entry = manifest[k];
      if (entry.at("name").get<std::string>() != kTensorNames[k]) {
        fail(ErrorCode::kShape, "model manifest out of order at tensor " +
                                    std::to_string(k));
      }
      const auto rows = entry.at("shape").at(0).get<std::size_t>();
      const auto cols = entry.at("shape").at(1).get<std::size_t>();
      const auto want = expected_shape(file.config, k);
      if (rows != want[0] || cols != want[1]) {
        fail(ErrorCode::kShape,
             "tensor " + std::string(kTensorNames[k]) + " has shape " +
                 std::to_string(rows) + "x" + std::to_string(cols) +
                 ", config requires " + std::to_string(want[0]) + "x" +
                 std::to_string(want[1]));
      }
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("bytes").get<std::uint64_t>();
      if (nbytes != rows * cols * sizeof(double)) {
        fail(ErrorCode::kShape, "tensor byte count does not match its shape");
      }
      if (offset > bytes.size() - data_begin ||
          nbytes > bytes.size() - data_begin - offset) {
        fail(ErrorCode::kCorrupt, "model tensor data is truncated");
      }
      Matrix m(rows, cols);
      for (std::size_t i = 0; i < m.data.size(); ++i) {
        m.data[i] = std::bit_cast<double>(get_le(bytes, data_begin + offset + 8 * i, 8));
      }
      *ts[k] = std::move(m);
    }
    if (bytes.size() - data_begin != header.at("data_bytes").get<std::uint64_t>()) {
      fail(ErrorCode::kCorrupt, "model file size does not match its manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("malformed model header: ") + e.what());
  }
  file.config.validate();
  file.params.validate(file.config);
  return file;
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  const auto bytes = serialize_model(file);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail(ErrorCode::kIo, "cannot write model file " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorCode::kIo, "write failed for " + path.string());
  }
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::kIo, "cannot open model file " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace bdlab
