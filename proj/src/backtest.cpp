#include "diffden/backtest.hpp"

#include <cmath>
#include <json.hpp>

#include "diffden/error.hpp"

namespace diffden {

std::string_view trade_mode_name(TradeMode m) noexcept {
  return m == TradeMode::LongOnly ? "long-only" : "long-short";
}

TradeMode parse_trade_mode(std::string_view s) {
  if (s == "long-only") return TradeMode::LongOnly;
  if (s == "long-short") return TradeMode::LongShort;
  throw Error(Errc::BadConfig, "unknown trade mode '" + std::string(s) + "'");
}

std::string_view prediction_mode_name(PredictionMode m) noexcept {
  return m == PredictionMode::Following ? "following" : "countering";
}

PredictionMode parse_prediction_mode(std::string_view s) {
  if (s == "following") return PredictionMode::Following;
  if (s == "countering") return PredictionMode::Countering;
  throw Error(Errc::BadConfig, "unknown prediction mode '" + std::string(s) + "'");
}

std::vector<double> span_ema(std::span<const double> x, std::size_t span) {
  if (x.empty()) throw Error(Errc::EmptySeries, "EMA of an empty series");
  if (span < 1) throw Error(Errc::BadParams, "EMA span must be >= 1");
  const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
  std::vector<double> y(x.size());
  y[0] = x[0];
  // Incremental form keeps a constant input exactly constant.
  for (std::size_t t = 1; t < x.size(); ++t) y[t] = y[t - 1] + alpha * (x[t] - y[t - 1]);
  return y;
}

Signal macd_signals(std::span<const double> series, const MacdParams& p) {
  if (p.fast < 1 || p.fast >= p.slow || p.signal < 1)
    throw Error(Errc::BadParams, "MACD needs 1 <= fast < slow and signal >= 1");
  const std::size_t warmup = p.slow + p.signal;
  if (series.size() <= warmup) throw Error(Errc::TooShort, "series shorter than MACD warmup");
  const auto fast = span_ema(series, p.fast);
  const auto slow = span_ema(series, p.slow);
  std::vector<double> line(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) line[t] = fast[t] - slow[t];
  const auto sig = span_ema(line, p.signal);

  Signal out(series.size(), Action::Hold);
  for (std::size_t t = std::max<std::size_t>(warmup, 1); t < series.size(); ++t) {
    const double prev = line[t - 1] - sig[t - 1];
    const double cur = line[t] - sig[t];
    if (prev <= 0.0 && cur > 0.0) out[t] = Action::Buy;
    else if (prev >= 0.0 && cur < 0.0) out[t] = Action::Sell;
  }
  return out;
}

Signal bollinger_signals(std::span<const double> series, const BollingerParams& p) {
  if (p.window < 2 || !(p.k > 0.0)) throw Error(Errc::BadParams, "Bollinger needs window >= 2, k > 0");
  const std::size_t w = p.window;
  if (series.size() <= w) throw Error(Errc::TooShort, "series shorter than Bollinger window");
  const std::size_t n = series.size();
  std::vector<double> lower(n, 0.0), upper(n, 0.0);
  // Two-pass stats per window; w is small and this keeps each value exact
  // with respect to its own window (no running-sum drift).
  for (std::size_t t = w - 1; t < n; ++t) {
    double mean = 0.0;
    for (std::size_t i = t + 1 - w; i <= t; ++i) mean += series[i];
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t i = t + 1 - w; i <= t; ++i) var += (series[i] - mean) * (series[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(w));
    lower[t] = mean - p.k * sd;
    upper[t] = mean + p.k * sd;
  }
  Signal out(n, Action::Hold);
  for (std::size_t t = w; t < n; ++t) {
    if (series[t - 1] < lower[t - 1] && series[t] >= lower[t]) out[t] = Action::Buy;
    else if (series[t - 1] > upper[t - 1] && series[t] <= upper[t]) out[t] = Action::Sell;
  }
  return out;
}

namespace {

Trade close_trade(std::size_t entry, std::size_t exit, Direction d, std::span<const double> prices) {
  Trade t{entry, exit, d, prices[entry], prices[exit], 0.0};
  const double r = std::log(t.exit_price / t.entry_price);
  t.log_return = d == Direction::Long ? r : -r;
  return t;
}

void tally(BacktestReport& rep) {
  rep.lor = rep.lsr = 0.0;
  for (const Trade& t : rep.trades) {
    if (t.direction == Direction::Long) rep.lor += t.log_return;
    rep.lsr += t.log_return;
  }
  rep.n_trades = rep.trades.size();
}

}  // namespace

BacktestReport run_signal_backtest(const Signal& signals, std::span<const double> prices, TradeMode mode) {
  if (signals.size() != prices.size())
    throw Error(Errc::Misalignment, "signal and price series differ in length");
  for (double p : prices)
    if (!(p > 0.0)) throw Error(Errc::NonPositivePrice, "backtest prices must be positive");
  BacktestReport rep;
  rep.strategy = std::string(trade_mode_name(mode));
  const std::size_t n = prices.size();
  if (n == 0) return rep;

  std::optional<Direction> pos;
  std::size_t entry = 0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const Action a = signals[t];
    if (a == Action::Hold) continue;
    const std::size_t fill = t + 1;
    const Direction want = a == Action::Buy ? Direction::Long : Direction::Short;
    if (pos && *pos == want) continue;
    if (pos) {
      rep.trades.push_back(close_trade(entry, fill, *pos, prices));
      pos.reset();
    }
    const bool may_open = mode == TradeMode::LongShort || want == Direction::Long;
    if (may_open && fill + 1 < n) {
      pos = want;
      entry = fill;
    }
  }
  if (pos) rep.trades.push_back(close_trade(entry, n - 1, *pos, prices));
  tally(rep);
  return rep;
}

BacktestReport run_signal_backtest(const Signal& signals, std::span<const std::int64_t> signal_timestamps,
                                   const PriceSeries& prices, TradeMode mode) {
  if (signal_timestamps.size() != prices.timestamps.size() ||
      !std::equal(signal_timestamps.begin(), signal_timestamps.end(), prices.timestamps.begin()))
    throw Error(Errc::Misalignment, "signal timestamps do not match price timestamps");
  return run_signal_backtest(signals, prices.closes, mode);
}

BacktestReport run_prediction_backtest(std::span<const int> predictions, std::span<const std::size_t> at,
                                       std::span<const double> prices, std::size_t horizon,
                                       PredictionMode mode) {
  if (predictions.size() != at.size())
    throw Error(Errc::Misalignment, "one price index per prediction is required");
  if (horizon < 1) throw Error(Errc::BadParams, "horizon must be >= 1");
  BacktestReport rep;
  rep.strategy = std::string(prediction_mode_name(mode));
  std::size_t long_n = 0, long_hits = 0, hits = 0;
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const std::size_t entry = at[r] + horizon, exit = at[r] + 2 * horizon;
    if (exit >= prices.size())
      throw Error(Errc::Misalignment, "action stage of prediction " + std::to_string(r) + " runs past the prices");
    const bool up = predictions[r] != 0;
    const bool go_long = mode == PredictionMode::Following ? up : !up;
    const Trade t = close_trade(entry, exit, go_long ? Direction::Long : Direction::Short, prices);
    const bool hit = t.log_return > 0.0;
    if (go_long) {
      ++long_n;
      if (hit) ++long_hits;
    }
    if (hit) ++hits;
    rep.trades.push_back(t);
  }
  tally(rep);
  rep.lohr = long_n ? static_cast<double>(long_hits) / static_cast<double>(long_n) : 0.0;
  rep.lshr = rep.trades.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rep.trades.size());
  return rep;
}

std::string BacktestReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["strategy"] = strategy;
  j["lor"] = lor;
  j["lsr"] = lsr;
  j["not"] = n_trades;
  if (lohr) j["lohr"] = *lohr;
  if (lshr) j["lshr"] = *lshr;
  auto& arr = j["trades"] = nlohmann::ordered_json::array();
  for (const Trade& t : trades) {
    arr.push_back({{"entry_index", t.entry_index},
                   {"exit_index", t.exit_index},
                   {"direction", t.direction == Direction::Long ? "long" : "short"},
                   {"entry_price", t.entry_price},
                   {"exit_price", t.exit_price},
                   {"log_return", t.log_return}});
  }
  return j.dump(indent);
}

}  // namespace diffden
