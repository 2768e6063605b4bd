#pragma once

// Price parsing, rolling windows, per-window normalization, EMA baselines,
// future-return labels and synthetic fixtures.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace diffden {

enum class Frequency { Day1, Hour1, Min5, Custom };

std::string_view frequency_name(Frequency f) noexcept;
Frequency parse_frequency(std::string_view name);

/// Closing prices of one instrument. Timestamps are epoch seconds, strictly
/// increasing; closes are strictly positive.
struct PriceSeries {
  std::string ticker;
  Frequency frequency = Frequency::Day1;
  std::vector<std::int64_t> timestamps;
  std::vector<double> closes;

  std::size_t size() const noexcept { return closes.size(); }
  /// Throws on any invariant violation.
  void validate() const;
};

enum class TimestampFormat {
  EpochSeconds,  // 1704067200
  IsoDate,       // 2024-01-01
  IsoDateTime,   // 2024-01-01 09:30:00 or 2024-01-01T09:30:00
  Compact,       // 20240101 with an optional HHMMSS time column (Stooq)
};

TimestampFormat parse_timestamp_format(std::string_view name);
std::string_view timestamp_format_name(TimestampFormat f) noexcept;

/// Maps CSV columns onto a PriceSeries. Column names match the header cell
/// exactly after whitespace trimming.
struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::string time_column;  // optional, Compact format only
  std::string close_column = "close";
  std::string ticker_column;  // optional; first data row wins
  TimestampFormat format = TimestampFormat::EpochSeconds;
  char delimiter = ',';
  std::string ticker = "UNKNOWN";
  Frequency frequency = Frequency::Day1;
};

PriceSeries parse_csv(std::string_view bytes, const CsvSchema& schema);
PriceSeries load_csv(const std::string& path, const CsvSchema& schema);
/// Writes `timestamp,close` with epoch-second timestamps.
std::string to_csv(const PriceSeries& series);

struct NormParams {
  double shift = 0.0;  // slice mean
  double scale = 1.0;  // slice population stdev, floored at kScaleFloor
  bool degenerate = false;

  static constexpr double kScaleFloor = 1e-12;
};

std::pair<std::vector<double>, NormParams> normalize(std::span<const double> values);
std::vector<double> denormalize(std::span<const double> values, const NormParams& norm);

enum class Split { Train, Test };
std::string_view split_name(Split s) noexcept;

/// Sample windows are classifier/training rows. Continuation windows exist only
/// so a sample at origin o can read the same family's value at o + L - 1 + h.
enum class WindowRole { Sample, Continuation };

struct Window {
  std::vector<double> values;  // normalized, length L
  std::string source_ticker;
  std::size_t origin_index = 0;  // offset of values[0] in the parent series
  NormParams norm;
  std::int64_t end_timestamp = 0;  // timestamp of values[L-1]
  WindowRole role = WindowRole::Sample;

  std::vector<double> denormalized() const { return denormalize(values, norm); }
  double last_price() const { return values.back() * norm.scale + norm.shift; }
};

struct WindowSet {
  std::vector<Window> windows;
  std::size_t length = 60;
  std::size_t stride = 20;
  Split split = Split::Train;

  std::size_t sample_count() const noexcept;
};

/// Windows at offsets 0, stride, 2*stride, ... while offset + L <= size.
WindowSet rolling_windows(const PriceSeries& series, std::size_t length = 60,
                          std::size_t stride = 20);

/// Number of windows rolling_windows produces.
constexpr std::size_t window_count(std::size_t n, std::size_t length, std::size_t stride) {
  return n < length ? 0 : (n - length) / stride + 1;
}

struct IngestOptions {
  std::size_t length = 60;
  std::size_t stride = 20;
  double train_fraction = 0.8;
  std::vector<int> horizons{1, 5, 10};
};

struct SplitWindows {
  WindowSet train;
  WindowSet test;
};

/// Chronological split of one series into a leading train segment
/// (floor(n * train_fraction) points) and a trailing test segment, then
/// windowing inside each segment so no window straddles the boundary.
/// Continuation windows at origin + h are added for every horizon when they
/// fit inside the same segment and are not already sample windows.
SplitWindows ingest_series(const PriceSeries& series, const IngestOptions& options);

/// y0 = x0, y_t = decay * y_{t-1} + (1 - decay) * x_t.
std::vector<double> ema(std::span<const double> series, double decay = 0.5);
PriceSeries ema_series(const PriceSeries& series, double decay = 0.5);

/// 1 iff log(p[t + horizon] / p[t]) > 0.
int future_return_label(std::span<const double> prices, std::size_t t, std::size_t horizon);

enum class SyntheticKind { Sine, TrendPlusAR1, Zigzag };
SyntheticKind parse_synthetic_kind(std::string_view name);
std::string_view synthetic_kind_name(SyntheticKind k) noexcept;

struct SyntheticParams {
  std::size_t length = 1000;
  double base = 100.0;
  // Sine: base * (1 + amplitude * (sin(2 pi cycles t / period + phase) + noise_std * eps_t))
  double amplitude = 0.05;
  double cycles = 1.0;
  std::size_t period = 60;
  double phase = 0.0;
  double noise_std = 0.0;
  // TrendPlusAR1: base * exp(drift * t + a_t), a_t = ar_coeff * a_{t-1} + ar_sigma * eps_t
  double drift = 0.0;
  double ar_coeff = 0.5;
  double ar_sigma = 0.01;
  // Zigzag: closes[i + 1] = closes[i] * (1 + moves[i]); length is moves.size() + 1
  std::vector<double> moves;

  std::string ticker = "SYN";
  std::int64_t start_timestamp = 1704067200;  // 2024-01-01T00:00:00Z
  std::int64_t step_seconds = 86400;
};

PriceSeries generate_synthetic(SyntheticKind kind, const SyntheticParams& params,
                               std::uint64_t seed);

}  // namespace diffden
