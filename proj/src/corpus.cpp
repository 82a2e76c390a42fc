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

#include "bdlab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "bdlab/error.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

// Each example carries between kMinSignal and kMaxSignal signal tokens; each
// one comes from the example's own class pool with probability kOwnSignal.
constexpr double kOwnSignal = 0.95;
constexpr std::size_t kMinSignal = 3;
constexpr std::size_t kMaxSignal = 6;
constexpr std::size_t kMinLength = 5;
constexpr std::size_t kMaxLength = 20;

struct SyntheticLayout {
  std::size_t noise_begin;
  std::size_t noise_size;
  std::size_t signal_begin[kNumClasses];
  std::size_t signal_size;
};

SyntheticLayout synthetic_layout(std::size_t vocab_size) {
  require(vocab_size >= 50, "synthetic vocab_size must be >= 50");
  const std::size_t reserved =
      2 + reserved_rare_words().size() + default_trigger_sentence().size();
  const std::size_t rest = vocab_size - reserved;
  SyntheticLayout layout{};
  layout.signal_size = rest / 4;
  layout.noise_begin = reserved;
  layout.noise_size = rest - 2 * layout.signal_size;
  layout.signal_begin[0] = layout.noise_begin + layout.noise_size;
  layout.signal_begin[1] = layout.signal_begin[0] + layout.signal_size;
  return layout;
}

}  // namespace

Vocab::Vocab() {
  add(kPadToken);
  add(kUnkToken);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  require(tokens.size() >= 2 && tokens[0] == kPadToken && tokens[1] == kUnkToken,
          "vocabulary must start with <pad>, <unk>");
  Vocab vocab;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    require(!vocab.find(tokens[i]).has_value(),
            "duplicate vocabulary token '" + tokens[i] + "'");
    vocab.add(tokens[i]);
  }
  return vocab;
}

TokenId Vocab::add(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) {
    return it->second;
  }
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) {
    return it->second;
  }
  return std::nullopt;
}

TokenId Vocab::id_or_unk(std::string_view token) const {
  return find(token).value_or(kUnkId);
}

const std::string& Vocab::token(TokenId id) const {
  require(id < tokens_.size(), "token id out of range");
  return tokens_[id];
}

std::array<std::size_t, kNumClasses> Dataset::label_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& ex : examples) {
    counts.at(static_cast<std::size_t>(ex.label))++;
  }
  return counts;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) {
      ++j;
    }
    std::size_t lo = i;
    std::size_t hi = j;
    while (lo < hi && is_ascii_punct(text[lo])) {
      ++lo;
    }
    while (hi > lo && is_ascii_punct(text[hi - 1])) {
      --hi;
    }
    if (hi > lo) {
      std::string piece(text.substr(lo, hi - lo));
      for (char& c : piece) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      out.push_back(std::move(piece));
    }
    i = j;
  }
  return out;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_freq) {
  require(min_freq >= 1, "min_freq must be >= 1");
  std::unordered_map<std::string_view, std::size_t> freq;
  std::vector<std::string_view> order;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) {
      auto [it, inserted] = freq.try_emplace(tok, 0);
      if (inserted) {
        order.push_back(tok);
      }
      ++it->second;
    }
  }
  Vocab vocab;
  for (auto tok : order) {
    if (freq[tok] >= min_freq) {
      vocab.add(tok);
    }
  }
  return vocab;
}

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text,
                            std::size_t max_len) {
  require(max_len >= 1, "max_len must be >= 1");
  std::vector<TokenId> ids;
  for (const auto& tok : tokenize(text)) {
    if (ids.size() == max_len) {
      break;
    }
    ids.push_back(vocab.id_or_unk(tok));
  }
  return ids;
}

std::string decode(const Vocab& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<TextRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::kIo, "cannot open dataset file " + path.string());
  }
  std::vector<TextRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), is_space)) {
      continue;
    }
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParse, where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
      fail(ErrorCode::kParse, where + ": missing string field \"text\"");
    }
    if (!obj.contains("label") || !obj["label"].is_number_integer()) {
      fail(ErrorCode::kParse, where + ": missing integer field \"label\"");
    }
    const auto label = obj["label"].get<long long>();
    if (label != 0 && label != 1) {
      fail(ErrorCode::kParse,
           where + ": label " + std::to_string(label) + " not in {0,1}");
    }
    TextRecord rec{obj["text"].get<std::string>(), static_cast<int>(label)};
    if (tokenize(rec.text).empty()) {
      fail(ErrorCode::kParse, where + ": text is empty after tokenization");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset encode_records(const std::vector<TextRecord>& records,
                       const Vocab& vocab, std::size_t max_len,
                       std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  ds.examples.reserve(records.size());
  for (const auto& rec : records) {
    auto ids = encode(vocab, rec.text, max_len);
    require(!ids.empty(), "record has no tokens");
    ds.examples.push_back({std::move(ids), rec.label});
  }
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path, const Vocab& vocab,
                   std::size_t max_len) {
  return encode_records(read_jsonl(path), vocab, max_len,
                        path.stem().string());
}

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset,
                 const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    fail(ErrorCode::kIo, "cannot write " + path.string());
  }
  for (const auto& ex : dataset.examples) {
    nlohmann::json obj = {{"text", decode(vocab, ex.tokens)}, {"label", ex.label}};
    out << obj.dump() << '\n';
  }
  if (!out) {
    fail(ErrorCode::kIo, "write failed for " + path.string());
  }
}

DatasetSplit split(const Dataset& dataset, const SplitFractions& f,
                   std::uint64_t seed) {
  require(f.train > 0 && f.dev > 0 && f.test > 0,
          "split fractions must be positive");
  require(std::abs(f.train + f.dev + f.test - 1.0) <= 1e-9,
          "split fractions must sum to 1");
  const std::size_t n = dataset.size();
  // The epsilon keeps e.g. 0.1 * 100 from rounding down to 9.
  const auto n_dev = static_cast<std::size_t>(std::floor(f.dev * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(f.test * n + 1e-9));
  require(n_dev >= 1 && n_test >= 1 && n > n_dev + n_test,
          "split of " + std::to_string(n) + " examples leaves an empty partition");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5011u));
  rng.shuffle(order);

  DatasetSplit out;
  out.train.name = dataset.name + "-train";
  out.dev.name = dataset.name + "-dev";
  out.test.name = dataset.name + "-test";
  const std::size_t n_train = n - n_dev - n_test;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = dataset.examples[order[i]];
    if (i < n_train) {
      out.train.examples.push_back(ex);
    } else if (i < n_train + n_dev) {
      out.dev.examples.push_back(ex);
    } else {
      out.test.examples.push_back(ex);
    }
  }
  return out;
}

const std::vector<std::string>& reserved_rare_words() {
  static const std::vector<std::string> words = {"cf", "mn", "bb", "tq", "mb"};
  return words;
}

const std::vector<std::string>& default_trigger_sentence() {
  static const std::vector<std::string> words = {"i", "watched", "this", "3d",
                                                 "movie"};
  return words;
}

Vocab synthetic_vocab(std::size_t vocab_size) {
  const auto layout = synthetic_layout(vocab_size);
  Vocab vocab;
  for (const auto& w : reserved_rare_words()) {
    vocab.add(w);
  }
  for (const auto& w : default_trigger_sentence()) {
    vocab.add(w);
  }
  for (std::size_t i = 0; i < layout.noise_size; ++i) {
    vocab.add("w" + std::to_string(i));
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const char prefix = c == 0 ? 'n' : 'p';
    for (std::size_t i = 0; i < layout.signal_size; ++i) {
      vocab.add(std::string(1, prefix) + std::to_string(i));
    }
  }
  return vocab;
}

Dataset generate_synthetic(std::size_t n, std::size_t vocab_size,
                           std::uint64_t seed) {
  require(n >= 100, "synthetic corpus size must be >= 100 (got " +
                        std::to_string(n) + ")");
  const auto layout = synthetic_layout(vocab_size);
  Rng rng(derive_seed(seed, 0x5e7u));

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i < n / 2 ? 0 : 1;
  }
  rng.shuffle(labels);

  Dataset ds;
  ds.name = "synthetic";
  ds.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    const std::size_t len = kMinLength + rng.below(kMaxLength - kMinLength + 1);
    Example ex;
    ex.label = label;
    ex.tokens.reserve(len);
    const std::size_t n_signal =
        kMinSignal + rng.below(kMaxSignal - kMinSignal + 1);
    for (std::size_t k = 0; k < len; ++k) {
      std::size_t id;
      if (k < n_signal) {
        const int pool = rng.uniform() < kOwnSignal ? label : 1 - label;
        id = layout.signal_begin[pool] + rng.below(layout.signal_size);
      } else {
        id = layout.noise_begin + rng.below(layout.noise_size);
      }
      ex.tokens.push_back(static_cast<TokenId>(id));
    }
    rng.shuffle(ex.tokens);
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

void validate_dataset(const Dataset& dataset, std::size_t vocab_size) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& ex = dataset.examples[i];
    const std::string where = "example " + std::to_string(i);
    require(!ex.tokens.empty(), where + " is empty");
    require(ex.label == 0 || ex.label == 1, where + " has label outside {0,1}");
    for (TokenId t : ex.tokens) {
      require(t != kPadId, where + " contains PAD");
      require(t < vocab_size, where + " has token id >= vocab size",
              ErrorCode::kShape);
    }
  }
}

}  // namespace bdlab
