#include "diffden/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "diffden/error.hpp"

namespace diffden {

DcReport dc_events(std::span<const double> prices, double threshold) {
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    throw Error(Errc::BadThreshold, "threshold must be a positive finite number");
  if (prices.size() < 2) throw Error(Errc::TooShort, "need at least two prices");
  for (double p : prices)
    if (!(p > 0.0)) throw Error(Errc::NonPositivePrice, "dc_events needs positive prices");

  enum class Mode { Undetermined, Up, Down };
  Mode mode = Mode::Undetermined;
  double extreme = prices[0];
  DcReport out{threshold, 0, {}};
  const double down = 1.0 - threshold, up = 1.0 + threshold;

  for (std::size_t t = 1; t < prices.size(); ++t) {
    const double p = prices[t];
    switch (mode) {
      case Mode::Undetermined:
        if (p <= extreme * down) {
          mode = Mode::Down;
          extreme = p;
          out.event_indices.push_back(t);
        } else if (p >= extreme * up) {
          mode = Mode::Up;
          extreme = p;
          out.event_indices.push_back(t);
        }
        break;
      case Mode::Up:
        if (p <= extreme * down) {
          mode = Mode::Down;
          extreme = p;
          out.event_indices.push_back(t);
        } else if (p > extreme) {
          extreme = p;
        }
        break;
      case Mode::Down:
        if (p >= extreme * up) {
          mode = Mode::Up;
          extreme = p;
          out.event_indices.push_back(t);
        } else if (p < extreme) {
          extreme = p;
        }
        break;
    }
  }
  out.event_count = out.event_indices.size();
  return out;
}

double f1_score(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fp + cm.fn == 0) throw Error(Errc::Undefined, "F1 undefined with tp = fp = fn = 0");
  if (cm.tp == 0) return 0.0;
  const double precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  const double recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  return 2.0 * precision * recall / (precision + recall);
}

double mcc(const ConfusionMatrix& cm, bool* degenerate) {
  const double tp = static_cast<double>(cm.tp), tn = static_cast<double>(cm.tn);
  const double fp = static_cast<double>(cm.fp), fn = static_cast<double>(cm.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (degenerate) *degenerate = den == 0.0;
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

ConfusionMatrix confusion_from_predictions(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty() && y_pred.empty()) throw Error(Errc::EmptyInput, "no predictions");
  if (y_true.size() != y_pred.size()) throw Error(Errc::LengthMismatch, "label and prediction counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool t = y_true[i] != 0, p = y_pred[i] != 0;
    if (t && p) ++cm.tp;
    else if (!t && p) ++cm.fp;
    else if (!t && !p) ++cm.tn;
    else ++cm.fn;
  }
  return cm;
}

Histogram return_histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw Error(Errc::EmptyInput, "histogram of no values");
  if (bins < 1) throw Error(Errc::BadParams, "bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  Histogram h;
  h.edges.resize(bins + 1);
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((v - lo) / width);
      b = std::min(b, bins - 1);
      // Guard the floor against rounding near an edge.
      while (b > 0 && v < h.edges[b]) --b;
      while (b + 1 < bins && v >= h.edges[b + 1]) ++b;
    }
    ++h.counts[b];
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  char buf[96];
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", h.edges[b], h.edges[b + 1], h.counts[b]);
    out += buf;
  }
  return out;
}

std::vector<double> log_returns(std::span<const double> prices) {
  std::vector<double> out;
  if (prices.size() < 2) return out;
  out.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) out.push_back(std::log(prices[i] / prices[i - 1]));
  return out;
}

}  // namespace diffden
