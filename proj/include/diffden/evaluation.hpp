#pragma once

// Directional-change event counts, binary classification metrics and return
// histograms.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace diffden {

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct DcReport {
  double threshold = 0.0;
  std::size_t event_count = 0;
  std::vector<std::size_t> event_indices;
};

/// Extremum-tracking directional-change detector on relative moves. Starts
/// undetermined with the reference fixed at p[0]; the first confirmed move in
/// either direction counts as an event.
DcReport dc_events(std::span<const double> prices, double threshold);

/// Harmonic mean of precision and recall. Throws Undefined when tp = fp = fn = 0.
double f1_score(const ConfusionMatrix& cm);

/// Matthews correlation. When a denominator factor is zero the result is 0
/// and *degenerate (if given) is set.
double mcc(const ConfusionMatrix& cm, bool* degenerate = nullptr);

/// Positive class is 1.
ConfusionMatrix confusion_from_predictions(std::span<const int> y_true, std::span<const int> y_pred);

struct Histogram {
  std::vector<double> edges;  // bins + 1, equal width over [min, max]
  std::vector<std::size_t> counts;
};

/// The last bin is closed on the right so max is counted.
Histogram return_histogram(std::span<const double> values, std::size_t bins);
/// `bin_lo,bin_hi,count` rows.
std::string histogram_csv(const Histogram& h);

/// log(p[i+1] / p[i]) for consecutive prices.
std::vector<double> log_returns(std::span<const double> prices);

}  // namespace diffden
