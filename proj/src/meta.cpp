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

#include "bdlab/meta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "bdlab/error.hpp"
#include "bdlab/parallel.hpp"

namespace bdlab {

namespace {

constexpr int kForestFormatVersion = 1;
constexpr double kMinGain = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double gini(std::size_t c0, std::size_t c1) {
  const double n = static_cast<double>(c0 + c1);
  if (n == 0.0) {
    return 0.0;
  }
  const double p0 = static_cast<double>(c0) / n;
  const double p1 = static_cast<double>(c1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

// Best midpoint split over the candidate features; strict comparison keeps
// the lowest feature index and the smallest threshold on ties.
Split best_split(const std::vector<WeightFeatures>& x, const std::vector<int>& y,
                 const std::vector<std::size_t>& samples,
                 const std::vector<std::size_t>& candidates) {
  Split best;
  best.impurity = std::numeric_limits<double>::infinity();
  const std::size_t n = samples.size();
  std::vector<std::pair<double, int>> column(n);
  std::size_t total1 = 0;
  for (std::size_t s : samples) {
    total1 += y[s] == 1 ? 1 : 0;
  }
  for (std::size_t f : candidates) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = {x[samples[i]][f], y[samples[i]]};
    }
    std::sort(column.begin(), column.end());
    std::size_t left0 = 0;
    std::size_t left1 = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      (column[i].second == 1 ? left1 : left0)++;
      const double a = column[i].first;
      const double b = column[i + 1].first;
      if (!(a < b)) {
        continue;
      }
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      const std::size_t right1 = total1 - left1;
      const std::size_t right0 = nr - right1;
      const double impurity = (static_cast<double>(nl) * gini(left0, left1) +
                               static_cast<double>(nr) * gini(right0, right1)) /
                              static_cast<double>(n);
      if (impurity < best.impurity) {
        double thr = a + (b - a) / 2.0;
        if (!(thr < b)) {
          thr = a;
        }
        best = {static_cast<int>(f), thr, impurity};
      }
    }
  }
  return best;
}

struct TreeBuilder {
  const std::vector<WeightFeatures>& x;
  const std::vector<int>& y;
  std::size_t max_depth;
  std::size_t features_per_split;
  Rng& rng;
  DecisionTree tree;

  int build(const std::vector<std::size_t>& samples, std::size_t depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode node;
    for (std::size_t s : samples) {
      node.counts[static_cast<std::size_t>(y[s])]++;
    }
    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    if (depth >= max_depth || pure) {
      tree.nodes[index] = node;
      return index;
    }
    const std::size_t n_features = x.front().size();
    std::vector<std::size_t> all(n_features);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t m = std::min(features_per_split, n_features);
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(all[i], all[i + rng.below(n_features - i)]);
    }
    std::vector<std::size_t> candidates(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates.begin(), candidates.end());

    const Split split = best_split(x, y, samples, candidates);
    const double parent = gini(node.counts[0], node.counts[1]);
    if (split.feature < 0 || !(split.impurity < parent - kMinGain)) {
      tree.nodes[index] = node;
      return index;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t s : samples) {
      (x[s][static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(s);
    }
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = build(left, depth + 1);
    node.right = build(right, depth + 1);
    tree.nodes[index] = node;
    return index;
  }
};

nlohmann::json node_to_json(const DecisionTree& tree, int index) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
  nlohmann::json j = {{"counts", n.counts}};
  if (n.feature >= 0) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

int node_from_json(const nlohmann::json& j, DecisionTree& tree, std::size_t n_features,
                   std::size_t depth) {
  require(depth <= 64, "forest tree is too deep", ErrorCode::kParse);
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.counts = j.at("counts").get<std::array<std::size_t, 2>>();
  if (j.contains("feature")) {
    node.feature = j.at("feature").get<int>();
    node.threshold = j.at("threshold").get<double>();
    require(node.feature >= 0 && static_cast<std::size_t>(node.feature) < n_features,
            "forest node feature index out of range", ErrorCode::kParse);
    require(std::isfinite(node.threshold), "forest threshold is not finite",
            ErrorCode::kParse);
    node.left = node_from_json(j.at("left"), tree, n_features, depth + 1);
    node.right = node_from_json(j.at("right"), tree, n_features, depth + 1);
  }
  tree.nodes[static_cast<std::size_t>(index)] = node;
  return index;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

}  // namespace

std::array<double, kStatsPerTensor> tensor_stats(std::span<const double> values) {
  require(!values.empty(), "cannot compute statistics of an empty tensor");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2]
                                   : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) {
    sq += (v - mean) * (v - mean);
  }
  const double std_dev = std::sqrt(sq / static_cast<double>(n));
  return {sorted.front(), sorted.back(), median, mean, std_dev};
}

WeightFeatures extract_features(const ModelParams& params) {
  WeightFeatures out;
  out.reserve(kNumFeatures);
  for (const Matrix* t : params.tensors()) {
    const auto stats = tensor_stats(t->data);
    out.insert(out.end(), stats.begin(), stats.end());
  }
  return out;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (auto t : kTensorNames) {
    for (auto s : kStatNames) {
      names.push_back(std::string(t) + "_" + std::string(s));
    }
  }
  return names;
}

ForestConfig ForestConfig::hsol() { return {}; }

ForestConfig ForestConfig::sst2() {
  ForestConfig c;
  c.n_trees = 50;
  c.max_depth = 1;
  return c;
}

ForestConfig ForestConfig::preset(const std::string& name) {
  if (name == "hsol") return hsol();
  if (name == "sst2") return sst2();
  fail(ErrorCode::kInvalidArgument,
       "unknown forest preset '" + name + "' (valid: hsol, sst2)");
}

void ForestConfig::validate() const {
  require(n_trees >= 1, "n_trees must be >= 1");
  require(max_depth >= 1, "max_depth must be >= 1");
  require(bootstrap_fraction > 0.0, "bootstrap_fraction must be positive");
}

nlohmann::json ForestConfig::to_json() const {
  return {{"n_trees", n_trees},
          {"max_depth", max_depth},
          {"bootstrap_fraction", bootstrap_fraction},
          {"bootstrap", bootstrap},
          {"features_per_split", features_per_split},
          {"seed", seed}};
}

ForestConfig ForestConfig::from_json(const nlohmann::json& j) {
  ForestConfig c = j.contains("preset") ? preset(j.at("preset").get<std::string>())
                                        : ForestConfig{};
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.bootstrap_fraction = j.value("bootstrap_fraction", c.bootstrap_fraction);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.features_per_split = j.value("features_per_split", c.features_per_split);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

int DecisionTree::vote(std::span<const double> features) const {
  require(!nodes.empty(), "empty decision tree", ErrorCode::kInternal);
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(
        features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].counts[1] > nodes[i].counts[0] ? 1 : 0;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

DecisionTree grow_tree(const std::vector<WeightFeatures>& features,
                       const std::vector<int>& labels,
                       const std::vector<std::size_t>& samples,
                       std::size_t max_depth, std::size_t features_per_split,
                       Rng& rng) {
  require(!samples.empty(), "cannot grow a tree on no samples");
  TreeBuilder builder{features, labels, max_depth, features_per_split, rng, {}};
  builder.build(samples, 0);
  return std::move(builder.tree);
}

MetaClassifier train_forest(const std::vector<WeightFeatures>& features,
                            const std::vector<int>& labels,
                            const ForestConfig& config) {
  config.validate();
  require(features.size() >= 2, "forest needs at least 2 samples");
  require(features.size() == labels.size(), "feature and label counts differ");
  const std::size_t f = features.front().size();
  require(f >= 1, "forest needs at least one feature");
  std::size_t count1 = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(features[i].size() == f, "feature vectors have different lengths",
            ErrorCode::kShape);
    require(labels[i] == 0 || labels[i] == 1, "forest labels must be 0 or 1");
    for (double v : features[i]) {
      require(std::isfinite(v), "feature value is not finite");
    }
    count1 += static_cast<std::size_t>(labels[i]);
  }
  require(count1 > 0 && count1 < labels.size(),
          "forest training needs both clean and backdoored samples");

  const std::size_t per_split =
      config.features_per_split > 0
          ? config.features_per_split
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f))));
  const std::size_t n = features.size();
  const std::size_t draw = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.bootstrap_fraction * static_cast<double>(n))));

  MetaClassifier out;
  out.config = config;
  out.n_features = f;
  out.trees.resize(config.n_trees);
  parallel_for(config.n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::size_t> samples;
    if (config.bootstrap) {
      samples.resize(draw);
      for (auto& s : samples) {
        s = rng.below(n);
      }
    } else {
      samples.resize(n);
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    out.trees[t] = grow_tree(features, labels, samples, config.max_depth, per_split, rng);
  });
  return out;
}

MetaPrediction predict(const MetaClassifier& classifier,
                       std::span<const double> features) {
  require(features.size() == classifier.n_features,
          "feature vector has length " + std::to_string(features.size()) +
              ", classifier expects " + std::to_string(classifier.n_features),
          ErrorCode::kShape);
  require(!classifier.trees.empty(), "classifier has no trees");
  std::size_t votes = 0;
  for (const auto& tree : classifier.trees) {
    votes += static_cast<std::size_t>(tree.vote(features));
  }
  MetaPrediction p;
  p.score = static_cast<double>(votes) / static_cast<double>(classifier.trees.size());
  p.backdoored = p.score >= 0.5;
  return p;
}

double detection_accuracy(const MetaClassifier& classifier,
                          const std::vector<WeightFeatures>& features,
                          const std::vector<int>& labels) {
  require(!features.empty(), "detection accuracy needs at least one model");
  require(features.size() == labels.size(), "feature and label counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    correct += (predict(classifier, features[i]).backdoored ? 1 : 0) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

nlohmann::json forest_to_json(const MetaClassifier& classifier) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : classifier.trees) {
    trees.push_back(node_to_json(t, 0));
  }
  return {{"format", "bdlab-forest"},
          {"format_version", kForestFormatVersion},
          {"config", classifier.config.to_json()},
          {"n_features", classifier.n_features},
          {"feature_names", classifier.n_features == kNumFeatures
                                ? nlohmann::json(feature_names())
                                : nlohmann::json::array()},
          {"trees", trees}};
}

MetaClassifier forest_from_json(const nlohmann::json& j) {
  try {
    require(j.value("format", std::string()) == "bdlab-forest",
            "not a bdlab forest file", ErrorCode::kParse);
    require(j.at("format_version").get<int>() == kForestFormatVersion,
            "unsupported forest format version", ErrorCode::kVersion);
    MetaClassifier out;
    out.config = ForestConfig::from_json(j.at("config"));
    out.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
      DecisionTree tree;
      node_from_json(tj, tree, out.n_features, 0);
      out.trees.push_back(std::move(tree));
    }
    require(!out.trees.empty(), "forest has no trees", ErrorCode::kParse);
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed forest JSON: ") + e.what());
  }
}

// --- zoo -----------------------------------------------------------------

void ZooSpec::validate(std::size_t vocab_size) const {
  require(n_models >= 4 && n_models % 2 == 0, "zoo n_models must be even and >= 4");
  require(clean_fraction > 0.0 && clean_fraction < 1.0, "clean_fraction must be in (0, 1)");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must be in (0, 1)");
  require(!trigger_pool.empty(), "zoo trigger pool is empty");
  require(lr_jitter >= 0.0 && lr_jitter < 1.0, "lr_jitter must be in [0, 1)");
  require(min_poisoning_rate > 0.0 && min_poisoning_rate <= max_poisoning_rate &&
              max_poisoning_rate <= 1.0,
          "poisoning rate range must satisfy 0 < min <= max <= 1");
  for (const auto& t : trigger_pool) {
    t.validate(vocab_size);
  }
  double total = 0.0;
  for (const auto& r : regime_pool) {
    require(r.weight >= 0.0, "regime weights must be non-negative");
    require(r.regime.poisoned(), "zoo regime pool may only hold poisoned regimes");
    total += r.weight;
  }
  require(regime_pool.empty() || total > 0.0, "regime weights sum to zero");
}

std::vector<TriggerSpec> default_trigger_pool(const Vocab& vocab) {
  std::vector<TriggerSpec> pool;
  for (const auto& w : reserved_rare_words()) {
    pool.push_back(make_trigger(vocab, TriggerKind::kWord, {w}));
  }
  pool.push_back(make_trigger(vocab, TriggerKind::kSentence, default_trigger_sentence()));
  return pool;
}

std::vector<const ZooMember*> Zoo::split(bool train) const {
  std::vector<const ZooMember*> out;
  for (const auto& m : members) {
    if (m.train == train) {
      out.push_back(&m);
    }
  }
  return out;
}

Zoo build_zoo(const ZooSpec& spec, const Dataset& train_set, const Dataset& dev,
              const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  spec.validate(model_config.vocab_size);
  const std::vector<WeightedRegime> pool =
      spec.regime_pool.empty() ? std::vector<WeightedRegime>{{IntensityRegime::moderate(), 1.0}}
                               : spec.regime_pool;
  double total_weight = 0.0;
  for (const auto& r : pool) {
    total_weight += r.weight;
  }
  const std::size_t n_clean = static_cast<std::size_t>(
      std::llround(spec.clean_fraction * static_cast<double>(spec.n_models)));

  Zoo zoo;
  zoo.members.resize(spec.n_models);
  parallel_for(spec.n_models, [&](std::size_t i) {
    const std::uint64_t member_seed = derive_seed(spec.seed, i);
    try {
      Rng rng(derive_seed(member_seed, 0x200u));
      const double lr_scale = rng.uniform(1.0 - spec.lr_jitter, 1.0 + spec.lr_jitter);
      IntensityRegime regime = IntensityRegime::clean();
      std::optional<TriggerSpec> trigger;
      if (i >= n_clean) {
        double u = rng.uniform() * total_weight;
        std::size_t k = 0;
        while (k + 1 < pool.size() && u >= pool[k].weight) {
          u -= pool[k].weight;
          ++k;
        }
        regime = pool[k].regime;
        regime.poisoning_rate =
            rng.uniform(spec.min_poisoning_rate, spec.max_poisoning_rate);
        trigger = spec.trigger_pool[rng.below(spec.trigger_pool.size())];
      }
      regime.lr_multiplier *= lr_scale;
      TrainConfig cfg = train_config;
      cfg.seed = member_seed;
      auto result = bdlab::train(init_params(model_config, member_seed), train_set, dev, trigger,
                          regime, cfg);
      ZooMember m;
      m.features = extract_features(result.params);
      m.label = trigger ? 1 : 0;
      m.regime = to_string(regime.name);
      m.trigger = trigger ? to_string(trigger->kind) : "none";
      m.seed = member_seed;
      m.report = std::move(result.report);
      zoo.members[i] = std::move(m);
    } catch (const Error& e) {
      fail(e.code(), "zoo member " + std::to_string(i) + " (seed " +
                         std::to_string(member_seed) + "): " + e.what());
    }
  });

  for (int label = 0; label < 2; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < zoo.members.size(); ++i) {
      if (zoo.members[i].label == label) {
        idx.push_back(i);
      }
    }
    Rng rng(derive_seed(spec.seed, 0x5b17u + static_cast<std::uint64_t>(label)));
    rng.shuffle(idx);
    const std::size_t n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      zoo.members[idx[k]].train = k < n_train;
    }
  }
  return zoo;
}

std::string zoo_csv(const Zoo& zoo) {
  std::ostringstream out;
  for (const auto& name : feature_names()) {
    out << name << ',';
  }
  out << "label,regime,trigger,seed,split\n";
  for (const auto& m : zoo.members) {
    for (double v : m.features) {
      out << fmt(v) << ',';
    }
    out << m.label << ',' << m.regime << ',' << m.trigger << ',' << m.seed << ','
        << (m.train ? "train" : "val") << '\n';
  }
  return out.str();
}

Zoo zoo_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "zoo CSV is empty", ErrorCode::kParse);
  const auto header = split_csv_line(line);
  require(header.size() == kNumFeatures + 5, "zoo CSV header has the wrong column count",
          ErrorCode::kParse);
  Zoo zoo;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto cells = split_csv_line(line);
    const std::string where = "zoo CSV line " + std::to_string(line_no);
    require(cells.size() == header.size(), where + ": wrong column count", ErrorCode::kParse);
    ZooMember m;
    try {
      for (std::size_t k = 0; k < kNumFeatures; ++k) {
        std::size_t used = 0;
        m.features.push_back(std::stod(cells[k], &used));
        require(used == cells[k].size(), where + ": bad number", ErrorCode::kParse);
      }
      m.label = std::stoi(cells[kNumFeatures]);
      m.seed = std::stoull(cells[kNumFeatures + 3]);
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParse, where + ": bad number");
    }
    require(m.label == 0 || m.label == 1, where + ": label must be 0 or 1", ErrorCode::kParse);
    m.regime = cells[kNumFeatures + 1];
    m.trigger = cells[kNumFeatures + 2];
    const auto& split = cells[kNumFeatures + 4];
    require(split == "train" || split == "val", where + ": split must be train or val",
            ErrorCode::kParse);
    m.train = split == "train";
    zoo.members.push_back(std::move(m));
  }
  return zoo;
}

}  // namespace bdlab
