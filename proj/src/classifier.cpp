#include "diffden/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <json.hpp>

#include "diffden/error.hpp"
#include "diffden/evaluation.hpp"
#include "diffden/rng.hpp"

namespace diffden {
namespace {

double logistic_loss(double f, int y) {
  // log(1 + e^f) - y f, stable for large |f|.
  return std::max(f, 0.0) - (y ? f : 0.0) + std::log1p(std::exp(-std::abs(f)));
}

double mean_loss(std::span<const double> f, std::span<const int> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += logistic_loss(f[i], y[i]);
  return s / static_cast<double>(f.size());
}

double sigmoid(double f) { return 1.0 / (1.0 + std::exp(-f)); }

// Training-time view: features pre-binned column-major so histogram building
// is a single pass over contiguous bytes per feature.
struct Binned {
  std::size_t rows = 0, width = 0;
  std::vector<std::vector<double>> cuts;  // per feature, strictly increasing
  std::vector<std::uint8_t> bins;         // width x rows
  std::uint8_t at(std::size_t f, std::size_t r) const { return bins[f * rows + r]; }
};

Binned bin_features(const ClassifierDataset& d, std::size_t n_bins) {
  Binned b;
  b.rows = d.rows();
  b.width = d.width;
  b.cuts.resize(d.width);
  b.bins.resize(d.width * b.rows);
  std::vector<double> col(b.rows);
  for (std::size_t f = 0; f < d.width; ++f) {
    for (std::size_t r = 0; r < b.rows; ++r) col[r] = d.features[r * d.width + f];
    std::sort(col.begin(), col.end());
    auto& cuts = b.cuts[f];
    for (std::size_t q = 1; q < n_bins; ++q) {
      const double v = col[q * b.rows / n_bins];
      if (v < col.back() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
    }
    for (std::size_t r = 0; r < b.rows; ++r) {
      const double v = d.features[r * d.width + f];
      b.bins[f * b.rows + r] =
          static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
    }
  }
  return b;
}

struct TrainNode {
  BoostedTrees::Node node;
  int cut_bin = -1;
};

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const BoostedTreesConfig& cfg, std::span<const double> g,
              std::span<const double> h, std::span<const std::size_t> features)
      : data_(data), cfg_(cfg), g_(g), h_(h), features_(features) {}

  std::vector<TrainNode> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(std::move(rows), 0);
    return nodes_;
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double G = 0.0, H = 0.0;
    for (std::size_t r : rows) G += g_[r], H += h_[r];
    const double lambda = cfg_.l2;
    nodes_[id].node.value = -cfg_.learning_rate * G / (H + lambda);
    if (depth >= cfg_.max_depth || rows.size() < 2 * cfg_.min_samples_leaf) return id;

    const double parent = G * G / (H + lambda);
    double best_gain = 1e-12;
    int best_f = -1, best_b = -1;
    std::vector<double> hg, hh;
    std::vector<std::size_t> hc;
    for (std::size_t f : features_) {
      const std::size_t nb = data_.cuts[f].size() + 1;
      if (nb < 2) continue;
      hg.assign(nb, 0.0);
      hh.assign(nb, 0.0);
      hc.assign(nb, 0);
      for (std::size_t r : rows) {
        const std::uint8_t b = data_.at(f, r);
        hg[b] += g_[r];
        hh[b] += h_[r];
        ++hc[b];
      }
      double gl = 0.0, hl = 0.0;
      std::size_t cl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hg[b], hl += hh[b], cl += hc[b];
        const std::size_t cr = rows.size() - cl;
        if (cl < cfg_.min_samples_leaf) continue;
        if (cr < cfg_.min_samples_leaf) break;
        const double gr = G - gl, hr = H - hl;
        const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_b = static_cast<int>(b);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (data_.at(static_cast<std::size_t>(best_f), r) <= best_b ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].node.feature = best_f;
    nodes_[id].node.threshold = data_.cuts[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_b)];
    nodes_[id].cut_bin = best_b;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[id].node.left = l;
    nodes_[id].node.right = r;
    return id;
  }

  const Binned& data_;
  const BoostedTreesConfig& cfg_;
  std::span<const double> g_, h_;
  std::span<const std::size_t> features_;
  std::vector<TrainNode> nodes_;
};

double eval_binned(const std::vector<TrainNode>& tree, const Binned& data, std::size_t r) {
  int i = 0;
  while (tree[static_cast<std::size_t>(i)].node.feature >= 0) {
    const auto& n = tree[static_cast<std::size_t>(i)];
    i = data.at(static_cast<std::size_t>(n.node.feature), r) <= n.cut_bin ? n.node.left : n.node.right;
  }
  return tree[static_cast<std::size_t>(i)].node.value;
}

double eval_tree(const BoostedTrees::Tree& tree, std::span<const double> x) {
  int i = 0;
  while (tree[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = tree[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return tree[static_cast<std::size_t>(i)].value;
}

}  // namespace

ClassifierDataset build_dataset(const WindowSet& windows, std::size_t horizon,
                                const std::string& family) {
  if (horizon < 1) throw Error(Errc::BadParams, "horizon must be >= 1");
  std::map<std::pair<std::string, std::size_t>, const Window*> by_origin;
  for (const Window& w : windows.windows) by_origin[{w.source_ticker, w.origin_index}] = &w;

  ClassifierDataset d;
  d.width = windows.length;
  d.horizon = horizon;
  d.family = family;
  for (const Window& w : windows.windows) {
    if (w.role != WindowRole::Sample) continue;
    if (w.values.size() != d.width) throw Error(Errc::ShapeMismatch, "window length differs from L");
    auto it = by_origin.find({w.source_ticker, w.origin_index + horizon});
    if (it == by_origin.end()) {
      ++d.dropped;
      continue;
    }
    d.features.insert(d.features.end(), w.values.begin(), w.values.end());
    d.labels.push_back(it->second->last_price() > w.last_price() ? 1 : 0);
    d.tickers.push_back(w.source_ticker);
    d.end_indices.push_back(w.origin_index + d.width - 1);
  }
  if (d.labels.empty())
    throw Error(Errc::NoContinuation, "no sample window has a continuation at horizon " +
                                          std::to_string(horizon));
  return d;
}

Prediction predict(const BinaryClassifier& model, std::span<const double> features, std::size_t width) {
  Prediction p;
  p.probabilities = model.predict_proba(features, width);
  p.labels.reserve(p.probabilities.size());
  for (double q : p.probabilities) p.labels.push_back(q > 0.5 ? 1 : 0);
  return p;
}

void BoostedTreesConfig::validate() const {
  if (n_rounds < 1 || max_depth < 1) throw Error(Errc::BadParams, "n_rounds and max_depth >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::BadParams, "learning_rate must be > 0");
  if (n_bins < 2 || n_bins > 256) throw Error(Errc::BadParams, "n_bins must lie in [2, 256]");
  if (min_samples_leaf < 1) throw Error(Errc::BadParams, "min_samples_leaf >= 1");
  if (!(l2 >= 0.0)) throw Error(Errc::BadParams, "l2 must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0) || !(colsample > 0.0 && colsample <= 1.0))
    throw Error(Errc::BadParams, "subsample and colsample must lie in (0, 1]");
}

void BoostedTrees::fit(const ClassifierDataset& train, std::uint64_t seed) {
  cfg_.validate();
  const std::size_t n = train.rows();
  if (n == 0 || train.width == 0) throw Error(Errc::EmptyDataset, "no training rows");
  if (train.features.size() != n * train.width)
    throw Error(Errc::ShapeMismatch, "feature matrix does not match rows x width");
  const std::size_t positives =
      static_cast<std::size_t>(std::count(train.labels.begin(), train.labels.end(), 1));
  if (positives == 0 || positives == n) throw Error(Errc::SingleClass, "training labels have one class");

  width_ = train.width;
  trees_.clear();
  loss_curve_.clear();
  const Binned data = bin_features(train, cfg_.n_bins);

  const double prior = static_cast<double>(positives) / static_cast<double>(n);
  base_score_ = std::log(prior / (1.0 - prior));
  std::vector<double> f(n, base_score_), g(n), h(n), trial(n);
  double loss = mean_loss(f, train.labels);
  loss_curve_.push_back(loss);

  Rng rng(seed, 0xb005);
  std::vector<std::size_t> all_rows(n), all_features(width_);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::iota(all_features.begin(), all_features.end(), 0);
  const std::size_t n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg_.subsample * static_cast<double>(n))));
  const std::size_t n_feat = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg_.colsample * static_cast<double>(width_))));

  for (std::size_t round = 0; round < cfg_.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(f[i]);
      g[i] = p - train.labels[i];
      h[i] = std::max(p * (1.0 - p), 1e-16);
    }
    std::vector<std::size_t> rows = all_rows, feats = all_features;
    if (n_rows < n) {
      std::shuffle(rows.begin(), rows.end(), rng.engine());
      rows.resize(n_rows);
      std::sort(rows.begin(), rows.end());
    }
    if (n_feat < width_) {
      std::shuffle(feats.begin(), feats.end(), rng.engine());
      feats.resize(n_feat);
      std::sort(feats.begin(), feats.end());
    }
    TreeBuilder builder(data, cfg_, g, h, feats);
    std::vector<TrainNode> tree = builder.build(std::move(rows));

    std::vector<double> delta(n);
    for (std::size_t i = 0; i < n; ++i) delta[i] = eval_binned(tree, data, i);

    double scale = 1.0, new_loss = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 10; ++attempt, scale *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = f[i] + scale * delta[i];
      new_loss = mean_loss(trial, train.labels);
      if (new_loss <= loss) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      Tree out;
      out.reserve(tree.size());
      for (auto& t : tree) {
        t.node.value *= scale;
        out.push_back(t.node);
      }
      trees_.push_back(std::move(out));
      f.swap(trial);
      loss = new_loss;
    }
    loss_curve_.push_back(loss);
  }
}

std::vector<double> BoostedTrees::raw_scores(std::span<const double> features, std::size_t width) const {
  if (width != width_ || width == 0 || features.size() % width != 0)
    throw Error(Errc::WidthMismatch, "feature width " + std::to_string(width) + " but model expects " +
                                         std::to_string(width_));
  const std::size_t rows = features.size() / width;
  std::vector<double> out(rows, base_score_);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto x = features.subspan(r * width, width);
    for (const Tree& t : trees_) out[r] += eval_tree(t, x);
  }
  return out;
}

std::vector<double> BoostedTrees::predict_proba(std::span<const double> features, std::size_t width) const {
  auto p = raw_scores(features, width);
  constexpr double lo = 1e-15, hi = 1.0 - 1e-15;
  for (double& v : p) v = std::clamp(sigmoid(v), lo, hi);
  return p;
}

std::string BoostedTrees::to_json() const {
  nlohmann::json j;
  j["kind"] = name();
  j["config"] = {{"n_rounds", cfg_.n_rounds},     {"max_depth", cfg_.max_depth},
                 {"learning_rate", cfg_.learning_rate}, {"n_bins", cfg_.n_bins},
                 {"min_samples_leaf", cfg_.min_samples_leaf}, {"l2", cfg_.l2},
                 {"subsample", cfg_.subsample}, {"colsample", cfg_.colsample}};
  j["width"] = width_;
  j["base_score"] = base_score_;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const Tree& t : trees_) {
    auto arr = nlohmann::json::array();
    for (const Node& n : t)
      arr.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(arr));
  }
  return j.dump();
}

BoostedTrees fit_boosted(const BoostedTreesConfig& cfg, const ClassifierDataset& train, std::uint64_t seed) {
  BoostedTrees m(cfg);
  m.fit(train, seed);
  return m;
}

ProtocolTable evaluate_protocol(const std::map<std::string, FamilySplits>& data,
                                std::span<const std::uint64_t> seeds, const BoostedTreesConfig& cfg,
                                ClassifierFactory factory) {
  if (seeds.empty()) throw Error(Errc::BadParams, "at least one seed is required");
  ProtocolTable table;
  for (const auto& [family, splits] : data) {
    for (const auto& [horizon, train] : splits.train) {
      auto test_it = splits.test.find(horizon);
      if (test_it == splits.test.end())
        throw Error(Errc::Misalignment, family + " has no test set at horizon " + std::to_string(horizon));
      const ClassifierDataset& test = test_it->second;
      HorizonMetrics m;
      m.train_rows = train.rows();
      m.test_rows = test.rows();
      for (std::uint64_t seed : seeds) {
        std::unique_ptr<BinaryClassifier> model =
            factory ? factory(cfg) : std::make_unique<BoostedTrees>(cfg);
        model->fit(train, seed);
        const Prediction p = predict(*model, test.features, test.width);
        const ConfusionMatrix cm = confusion_from_predictions(test.labels, p.labels);
        double f1 = 0.0;
        if (cm.tp + cm.fp + cm.fn == 0) ++m.f1_undefined;
        else f1 = f1_score(cm);
        bool degenerate = false;
        const double mc = mcc(cm, &degenerate);
        if (degenerate) ++m.mcc_degenerate;
        m.f1_per_seed.push_back(f1);
        m.mcc_per_seed.push_back(mc);
      }
      const double k = static_cast<double>(seeds.size());
      m.f1_mean = std::accumulate(m.f1_per_seed.begin(), m.f1_per_seed.end(), 0.0) / k;
      m.mcc_mean = std::accumulate(m.mcc_per_seed.begin(), m.mcc_per_seed.end(), 0.0) / k;
      table[family][horizon] = std::move(m);
    }
  }
  return table;
}

std::string protocol_json(const ProtocolTable& table, int indent) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [family, by_h] : table) {
    auto& fam = j[family];
    for (const auto& [h, m] : by_h) {
      fam[std::to_string(h)] = {{"f1_mean", m.f1_mean},
                                {"mcc_mean", m.mcc_mean},
                                {"f1_per_seed", m.f1_per_seed},
                                {"mcc_per_seed", m.mcc_per_seed},
                                {"f1_undefined", m.f1_undefined},
                                {"mcc_degenerate", m.mcc_degenerate},
                                {"train_rows", m.train_rows},
                                {"test_rows", m.test_rows}};
    }
  }
  return j.dump(indent);
}

}  // namespace diffden
