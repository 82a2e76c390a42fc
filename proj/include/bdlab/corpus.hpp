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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace bdlab {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr int kNumClasses = 2;

/// Dense token vocabulary. Ids 0 and 1 are always PAD and UNK.
class Vocab {
 public:
  Vocab();

  /// Rebuilds a vocabulary from its token list (as stored in model files).
  /// The list must start with PAD, UNK and contain no duplicates.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  /// Returns the id of token, appending it when absent.
  TokenId add(std::string_view token);

  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;

  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct Example {
  std::vector<TokenId> tokens;
  int label = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::array<std::size_t, kNumClasses> label_counts() const;
};

/// A text line of a JSONL dataset file.
struct TextRecord {
  std::string text;
  int label = 0;
};

/// Lowercases, splits on whitespace and strips leading/trailing ASCII
/// punctuation from every piece. Empty pieces are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// PAD, UNK, then every token with frequency >= min_freq in first-occurrence
/// order.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_freq);

/// Tokenizes, maps unknown tokens to UNK and truncates to max_len.
std::vector<TokenId> encode(const Vocab& vocab, std::string_view text,
                            std::size_t max_len);

/// Space-joined token strings.
std::string decode(const Vocab& vocab, std::span<const TokenId> ids);

/// Reads {"text": ..., "label": 0|1} lines. Errors name the 1-based line.
/// Blank lines are skipped.
std::vector<TextRecord> read_jsonl(const std::filesystem::path& path);

Dataset encode_records(const std::vector<TextRecord>& records,
                       const Vocab& vocab, std::size_t max_len,
                       std::string name);

Dataset load_jsonl(const std::filesystem::path& path, const Vocab& vocab,
                   std::size_t max_len);

void write_jsonl(const std::filesystem::path& path, const Dataset& dataset,
                 const Vocab& vocab);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  Dataset train;
  Dataset dev;
  Dataset test;
};

/// Seeded shuffle, then dev/test sizes are floor(fraction * N) and the
/// remainder goes to train.
DatasetSplit split(const Dataset& dataset, const SplitFractions& fractions,
                   std::uint64_t seed);

/// Vocabulary used by generate_synthetic. Layout: PAD, UNK, the reserved rare
/// words and the default sentence-trigger words (neither is emitted by the
/// generator), then the shared noise pool, then the class-0 and class-1
/// signal pools.
Vocab synthetic_vocab(std::size_t vocab_size);

/// Rare words that the generator never emits; the first is the default word
/// trigger.
const std::vector<std::string>& reserved_rare_words();

/// Default sentence trigger. The synthetic generator never emits these words.
const std::vector<std::string>& default_trigger_sentence();

/// Balanced two-class corpus over synthetic_vocab(vocab_size). A class-c
/// example holds 3 to 6 signal tokens, each drawn from the class-c pool with
/// probability 0.95 and from the other pool otherwise; the remaining tokens
/// are shared noise. Lengths are uniform in [5, 20].
Dataset generate_synthetic(std::size_t n, std::size_t vocab_size,
                           std::uint64_t seed);

/// Throws unless every token id is < vocab_size, no example contains PAD and
/// labels are in {0, 1}.
void validate_dataset(const Dataset& dataset, std::size_t vocab_size);

}  // namespace bdlab
