#pragma once

// Binary future-return classification on normalized windows. The protocol
// code talks to the BinaryClassifier interface; BoostedTrees is the default.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffden/data_ingest.hpp"

namespace diffden {

struct ClassifierDataset {
  std::vector<double> features;  // rows x width, row-major
  std::size_t width = 0;
  std::vector<int> labels;
  std::size_t horizon = 1;
  std::string family;
  std::size_t dropped = 0;  // sample windows without a continuation
  // Where each row came from, for aligning predictions with prices.
  std::vector<std::string> tickers;
  std::vector<std::size_t> end_indices;  // origin + L - 1 in the parent series

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(features).subspan(r * width, width);
  }
};

/// One row per sample window whose same-family continuation window at
/// origin + horizon is present in `windows`. The label is 1 iff the
/// continuation's last denormalized value exceeds the sample's.
ClassifierDataset build_dataset(const WindowSet& windows, std::size_t horizon,
                                const std::string& family);

struct Prediction {
  std::vector<int> labels;
  std::vector<double> probabilities;
};

class BinaryClassifier {
 public:
  virtual ~BinaryClassifier() = default;
  virtual void fit(const ClassifierDataset& train, std::uint64_t seed) = 0;
  /// P(label = 1) per row of a rows x width matrix.
  virtual std::vector<double> predict_proba(std::span<const double> features,
                                            std::size_t width) const = 0;
  virtual std::string name() const = 0;
};

/// Class 1 iff probability > 0.5.
Prediction predict(const BinaryClassifier& model, std::span<const double> features, std::size_t width);

struct BoostedTreesConfig {
  std::size_t n_rounds = 200;
  std::size_t max_depth = 3;
  double learning_rate = 0.1;
  std::size_t n_bins = 32;
  std::size_t min_samples_leaf = 5;
  double l2 = 1.0;
  double subsample = 0.8;         // rows per round, without replacement
  double colsample = 0.8;         // features per tree
  bool operator==(const BoostedTreesConfig&) const = default;
  void validate() const;
};

/// Gradient-boosted depth-limited regression trees on logistic loss with
/// quantile-binned split candidates and Newton leaf values. A tree whose
/// addition would raise the full training loss is shrunk by halves and
/// dropped if that does not help, so the recorded loss never increases.
class BoostedTrees : public BinaryClassifier {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left iff x[feature] <= threshold
    int left = -1, right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  explicit BoostedTrees(BoostedTreesConfig cfg = {}) : cfg_(cfg) {}

  void fit(const ClassifierDataset& train, std::uint64_t seed) override;
  std::vector<double> predict_proba(std::span<const double> features,
                                    std::size_t width) const override;
  std::string name() const override { return "boosted-trees"; }

  std::vector<double> raw_scores(std::span<const double> features, std::size_t width) const;

  const BoostedTreesConfig& config() const noexcept { return cfg_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  double base_score() const noexcept { return base_score_; }
  /// Mean training logistic loss: index 0 before any tree, then after each round.
  const std::vector<double>& loss_curve() const noexcept { return loss_curve_; }
  std::string to_json() const;

 private:
  BoostedTreesConfig cfg_;
  std::size_t width_ = 0;
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
  std::vector<double> loss_curve_;
};

/// Convenience wrapper around BoostedTrees::fit.
BoostedTrees fit_boosted(const BoostedTreesConfig& cfg, const ClassifierDataset& train,
                         std::uint64_t seed);

struct HorizonMetrics {
  double f1_mean = 0.0;
  double mcc_mean = 0.0;
  std::vector<double> f1_per_seed;
  std::vector<double> mcc_per_seed;
  std::size_t f1_undefined = 0;  // seeds where tp = fp = fn = 0 (scored 0)
  std::size_t mcc_degenerate = 0;
  std::size_t train_rows = 0, test_rows = 0;
};

struct FamilySplits {
  std::map<std::size_t, ClassifierDataset> train;  // by horizon
  std::map<std::size_t, ClassifierDataset> test;
};

/// family -> horizon -> metrics
using ProtocolTable = std::map<std::string, std::map<std::size_t, HorizonMetrics>>;

using ClassifierFactory = std::unique_ptr<BinaryClassifier> (*)(const BoostedTreesConfig&);

/// Fits one model per (family, horizon, seed) on train, scores on test.
ProtocolTable evaluate_protocol(const std::map<std::string, FamilySplits>& data,
                                std::span<const std::uint64_t> seeds,
                                const BoostedTreesConfig& cfg = {},
                                ClassifierFactory factory = nullptr);

/// {family: {horizon: {f1_mean, mcc_mean, f1_per_seed[], mcc_per_seed[], ...}}}
std::string protocol_json(const ProtocolTable& table, int indent = 2);

}  // namespace diffden
