#pragma once

// Signal generation on a (possibly denoised) series, execution on original
// prices, and the prediction-stage / action-stage strategies.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffden/data_ingest.hpp"

namespace diffden {

enum class Action : std::uint8_t { Hold, Buy, Sell };
using Signal = std::vector<Action>;

struct MacdParams {
  std::size_t fast = 12, slow = 26, signal = 9;
  bool operator==(const MacdParams&) const = default;
};

struct BollingerParams {
  std::size_t window = 20;
  double k = 2.0;
  bool operator==(const BollingerParams&) const = default;
};

enum class TradeMode { LongOnly, LongShort };
enum class PredictionMode { Following, Countering };

std::string_view trade_mode_name(TradeMode m) noexcept;
TradeMode parse_trade_mode(std::string_view s);
std::string_view prediction_mode_name(PredictionMode m) noexcept;
PredictionMode parse_prediction_mode(std::string_view s);

struct StrategyParams {
  MacdParams macd;
  BollingerParams bollinger;
  PredictionMode mode = PredictionMode::Following;
  bool operator==(const StrategyParams&) const = default;
};

/// Span EMA, alpha = 2 / (span + 1), seeded with x[0].
std::vector<double> span_ema(std::span<const double> x, std::size_t span);

/// Buy where MACD - signal line turns from <= 0 to > 0, Sell on the mirror
/// crossing. The first slow + signal entries are Hold.
Signal macd_signals(std::span<const double> series, const MacdParams& params = {});

/// Mean-reversion re-entry: Buy when price moves from below the lower band to
/// at or above it, Sell when it moves from above the upper band to at or
/// below it. Bands use the population stdev of the trailing window.
Signal bollinger_signals(std::span<const double> series, const BollingerParams& params = {});

enum class Direction : std::uint8_t { Long, Short };

struct Trade {
  std::size_t entry_index = 0, exit_index = 0;
  Direction direction = Direction::Long;
  double entry_price = 0.0, exit_price = 0.0;
  double log_return = 0.0;  // signed by direction
};

struct BacktestReport {
  std::string strategy;
  double lor = 0.0;  // sum of long-trade log returns
  double lsr = 0.0;  // sum of all trade log returns
  std::size_t n_trades = 0;
  std::optional<double> lohr, lshr;  // prediction strategies only
  std::vector<Trade> trades;

  std::string to_json(int indent = 2) const;
};

/// Fills at the next index's price. LongOnly: Buy opens a long when flat, Sell
/// closes it. LongShort: Buy closes a short and opens a long, Sell the reverse.
/// No position is opened at the final index; an open position is closed at the
/// final price.
BacktestReport run_signal_backtest(const Signal& signals, std::span<const double> prices,
                                   TradeMode mode);

/// Timestamp-checked overload: the signal timestamps must equal the price
/// timestamps.
BacktestReport run_signal_backtest(const Signal& signals, std::span<const std::int64_t> signal_timestamps,
                                   const PriceSeries& prices, TradeMode mode);

/// Prediction r was made on the stage ending at price index t = at[r]; the
/// position is held over the action stage [t + h, t + 2h]. Following: 1 ->
/// long, 0 -> short; Countering reverses. A zero stage return is a miss.
BacktestReport run_prediction_backtest(std::span<const int> predictions,
                                       std::span<const std::size_t> at,
                                       std::span<const double> prices, std::size_t horizon,
                                       PredictionMode mode);

}  // namespace diffden
