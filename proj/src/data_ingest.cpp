#include "diffden/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "diffden/error.hpp"
#include "diffden/rng.hpp"

namespace diffden {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                        s.front() == '"'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

bool civil_to_epoch(int y, unsigned m, unsigned d, int hh, int mm, int ss, std::int64_t& out) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return false;
  const sys_days days{ymd};
  out = static_cast<std::int64_t>(days.time_since_epoch().count()) * 86400 + hh * 3600 +
        mm * 60 + ss;
  return true;
}

bool parse_digits(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  return parse_number(s.substr(pos, len), out);
}

bool parse_timestamp(std::string_view cell, std::string_view time_cell, TimestampFormat format,
                     std::int64_t& out) {
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  switch (format) {
    case TimestampFormat::EpochSeconds:
      return parse_number(cell, out);
    case TimestampFormat::IsoDate:
      if (cell.size() != 10 || cell[4] != '-' || cell[7] != '-') return false;
      if (!parse_digits(cell, 0, 4, y) || !parse_digits(cell, 5, 2, mo) ||
          !parse_digits(cell, 8, 2, d))
        return false;
      return civil_to_epoch(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), 0, 0, 0, out);
    case TimestampFormat::IsoDateTime:
      if (cell.size() != 19 || cell[4] != '-' || cell[7] != '-' ||
          (cell[10] != ' ' && cell[10] != 'T') || cell[13] != ':' || cell[16] != ':')
        return false;
      if (!parse_digits(cell, 0, 4, y) || !parse_digits(cell, 5, 2, mo) ||
          !parse_digits(cell, 8, 2, d) || !parse_digits(cell, 11, 2, hh) ||
          !parse_digits(cell, 14, 2, mi) || !parse_digits(cell, 17, 2, ss))
        return false;
      return civil_to_epoch(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), hh, mi, ss,
                            out);
    case TimestampFormat::Compact:
      if (cell.size() != 8) return false;
      if (!parse_digits(cell, 0, 4, y) || !parse_digits(cell, 4, 2, mo) ||
          !parse_digits(cell, 6, 2, d))
        return false;
      if (!time_cell.empty()) {
        if (time_cell.size() != 6) return false;
        if (!parse_digits(time_cell, 0, 2, hh) || !parse_digits(time_cell, 2, 2, mi) ||
            !parse_digits(time_cell, 4, 2, ss))
          return false;
      }
      return civil_to_epoch(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), hh, mi, ss,
                            out);
  }
  return false;
}

Window make_window(const PriceSeries& series, std::size_t origin, std::size_t length,
                   WindowRole role) {
  Window w;
  auto slice = std::span<const double>(series.closes).subspan(origin, length);
  auto [values, norm] = normalize(slice);
  w.values = std::move(values);
  w.norm = norm;
  w.source_ticker = series.ticker;
  w.origin_index = origin;
  w.end_timestamp = series.timestamps[origin + length - 1];
  w.role = role;
  return w;
}

void append_segment(const PriceSeries& series, std::size_t begin, std::size_t end,
                    const IngestOptions& opt, WindowSet& out) {
  std::set<std::size_t> samples;
  for (std::size_t o = begin; o + opt.length <= end; o += opt.stride) samples.insert(o);
  std::set<std::size_t> continuations;
  for (std::size_t o : samples) {
    for (int h : opt.horizons) {
      const std::size_t oc = o + static_cast<std::size_t>(h);
      if (oc + opt.length <= end && !samples.contains(oc)) continuations.insert(oc);
    }
  }
  for (std::size_t o : samples)
    out.windows.push_back(make_window(series, o, opt.length, WindowRole::Sample));
  for (std::size_t o : continuations)
    out.windows.push_back(make_window(series, o, opt.length, WindowRole::Continuation));
}

}  // namespace

std::string_view frequency_name(Frequency f) noexcept {
  switch (f) {
    case Frequency::Day1: return "1day";
    case Frequency::Hour1: return "1hour";
    case Frequency::Min5: return "5min";
    case Frequency::Custom: return "custom";
  }
  return "custom";
}

Frequency parse_frequency(std::string_view name) {
  if (name == "1day") return Frequency::Day1;
  if (name == "1hour") return Frequency::Hour1;
  if (name == "5min") return Frequency::Min5;
  if (name == "custom") return Frequency::Custom;
  throw Error(Errc::BadConfig, "unknown frequency '" + std::string(name) + "'");
}

TimestampFormat parse_timestamp_format(std::string_view name) {
  if (name == "epoch") return TimestampFormat::EpochSeconds;
  if (name == "iso-date") return TimestampFormat::IsoDate;
  if (name == "iso-datetime") return TimestampFormat::IsoDateTime;
  if (name == "compact") return TimestampFormat::Compact;
  throw Error(Errc::BadConfig, "unknown timestamp format '" + std::string(name) + "'");
}

std::string_view timestamp_format_name(TimestampFormat f) noexcept {
  switch (f) {
    case TimestampFormat::EpochSeconds: return "epoch";
    case TimestampFormat::IsoDate: return "iso-date";
    case TimestampFormat::IsoDateTime: return "iso-datetime";
    case TimestampFormat::Compact: return "compact";
  }
  return "epoch";
}

void PriceSeries::validate() const {
  if (timestamps.size() != closes.size())
    throw Error(Errc::MalformedRow, "timestamps and closes differ in length");
  for (std::size_t i = 0; i < closes.size(); ++i) {
    if (!(closes[i] > 0.0) || !std::isfinite(closes[i]))
      throw Error(Errc::NonPositivePrice, "close at index " + std::to_string(i) + " is not > 0");
    if (i > 0 && timestamps[i] <= timestamps[i - 1])
      throw Error(Errc::DuplicateTimestamp,
                  "timestamps not strictly increasing at index " + std::to_string(i));
  }
}

PriceSeries parse_csv(std::string_view bytes, const CsvSchema& schema) {
  if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);

  std::vector<std::pair<std::int64_t, double>> rows;
  std::string ticker = schema.ticker;
  bool ticker_seen = false;
  long ts_col = -1, time_col = -1, close_col = -1, ticker_col = -1;
  std::size_t line_no = 0;
  bool header_done = false;

  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (nl == bytes.size()) break;
      continue;
    }
    const auto fields = split_fields(line, schema.delimiter);
    if (!header_done) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const long idx = static_cast<long>(i);
        if (fields[i] == schema.timestamp_column) ts_col = idx;
        if (!schema.time_column.empty() && fields[i] == schema.time_column) time_col = idx;
        if (fields[i] == schema.close_column) close_col = idx;
        if (!schema.ticker_column.empty() && fields[i] == schema.ticker_column) ticker_col = idx;
      }
      if (ts_col < 0 || close_col < 0 || (!schema.time_column.empty() && time_col < 0))
        throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) +
                                            ": header lacks the schema's columns");
      header_done = true;
      continue;
    }
    const long needed = std::max({ts_col, close_col, time_col, ticker_col});
    if (static_cast<long>(fields.size()) <= needed)
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": too few fields");
    std::int64_t ts = 0;
    const std::string_view time_cell = time_col >= 0 ? fields[time_col] : std::string_view{};
    if (!parse_timestamp(fields[ts_col], time_cell, schema.format, ts))
      throw Error(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": bad timestamp '" +
                      std::string(fields[ts_col]) + "'");
    double close = 0.0;
    if (!parse_number(fields[close_col], close) || !std::isfinite(close))
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": bad close '" +
                                          std::string(fields[close_col]) + "'");
    if (!(close > 0.0))
      throw Error(Errc::NonPositivePrice, "line " + std::to_string(line_no) + ": close " +
                                              std::string(fields[close_col]));
    if (ticker_col >= 0 && !ticker_seen) {
      ticker = std::string(fields[ticker_col]);
      ticker_seen = true;
    }
    rows.emplace_back(ts, close);
  }
  if (!header_done) throw Error(Errc::MalformedRow, "line 1: missing header");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  PriceSeries out;
  out.ticker = ticker;
  out.frequency = schema.frequency;
  out.timestamps.reserve(rows.size());
  out.closes.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first == rows[i - 1].first)
      throw Error(Errc::DuplicateTimestamp, "timestamp " + std::to_string(rows[i].first));
    out.timestamps.push_back(rows[i].first);
    out.closes.push_back(rows[i].second);
  }
  return out;
}

PriceSeries load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string to_csv(const PriceSeries& series) {
  std::ostringstream out;
  out.precision(17);
  out << "timestamp,close\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    out << series.timestamps[i] << ',' << series.closes[i] << '\n';
  return out.str();
}

std::pair<std::vector<double>, NormParams> normalize(std::span<const double> values) {
  NormParams norm;
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) {
    norm.degenerate = true;
    return {out, norm};
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stdev = std::sqrt(ss / n);
  norm.shift = mean;
  if (stdev <= NormParams::kScaleFloor * std::max(1.0, std::abs(mean))) {
    norm.scale = std::max(stdev, NormParams::kScaleFloor);
    norm.degenerate = true;
    return {out, norm};
  }
  norm.scale = stdev;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / stdev;
  return {out, norm};
}

std::vector<double> denormalize(std::span<const double> values, const NormParams& norm) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * norm.scale + norm.shift;
  return out;
}

std::string_view split_name(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

std::size_t WindowSet::sample_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(windows.begin(), windows.end(), [](const Window& w) {
    return w.role == WindowRole::Sample;
  }));
}

WindowSet rolling_windows(const PriceSeries& series, std::size_t length, std::size_t stride) {
  if (length < 2) throw Error(Errc::BadParams, "window length must be >= 2");
  if (stride < 1) throw Error(Errc::BadParams, "stride must be >= 1");
  if (series.size() < length)
    throw Error(Errc::SeriesTooShort, "series of length " + std::to_string(series.size()) +
                                          " is shorter than window " + std::to_string(length));
  WindowSet set;
  set.length = length;
  set.stride = stride;
  for (std::size_t o = 0; o + length <= series.size(); o += stride)
    set.windows.push_back(make_window(series, o, length, WindowRole::Sample));
  return set;
}

SplitWindows ingest_series(const PriceSeries& series, const IngestOptions& opt) {
  if (opt.length < 2) throw Error(Errc::BadParams, "window length must be >= 2");
  if (opt.stride < 1) throw Error(Errc::BadParams, "stride must be >= 1");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction <= 1.0))
    throw Error(Errc::BadParams, "train fraction must be in (0, 1]");
  for (int h : opt.horizons)
    if (h < 1) throw Error(Errc::BadParams, "horizons must be >= 1");
  series.validate();

  const std::size_t n = series.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * opt.train_fraction));
  if (n_train < opt.length)
    throw Error(Errc::SeriesTooShort, "train segment of " + series.ticker + " holds no window");
  if (n_train < n && n - n_train < opt.length)
    throw Error(Errc::SeriesTooShort, "test segment of " + series.ticker + " holds no window");

  SplitWindows out;
  out.train.length = out.test.length = opt.length;
  out.train.stride = out.test.stride = opt.stride;
  out.train.split = Split::Train;
  out.test.split = Split::Test;
  append_segment(series, 0, n_train, opt, out.train);
  if (n_train < n) append_segment(series, n_train, n, opt, out.test);
  return out;
}

std::vector<double> ema(std::span<const double> series, double decay) {
  if (series.empty()) throw Error(Errc::EmptySeries, "ema of an empty series");
  if (!(decay > 0.0 && decay < 1.0))
    throw Error(Errc::DecayOutOfRange, "decay must lie in (0, 1)");
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (std::size_t t = 1; t < series.size(); ++t)
    out[t] = decay * out[t - 1] + (1.0 - decay) * series[t];
  return out;
}

PriceSeries ema_series(const PriceSeries& series, double decay) {
  PriceSeries out = series;
  out.closes = ema(series.closes, decay);
  return out;
}

int future_return_label(std::span<const double> prices, std::size_t t, std::size_t horizon) {
  if (t + horizon >= prices.size())
    throw Error(Errc::IndexOutOfRange, "t + horizon beyond the labeling series");
  const double p0 = prices[t];
  const double p1 = prices[t + horizon];
  if (!(p0 > 0.0) || !(p1 > 0.0)) throw Error(Errc::NonPositivePrice, "label needs prices > 0");
  return std::log(p1 / p0) > 0.0 ? 1 : 0;
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  if (name == "sine") return SyntheticKind::Sine;
  if (name == "trend-ar1") return SyntheticKind::TrendPlusAR1;
  if (name == "zigzag") return SyntheticKind::Zigzag;
  throw Error(Errc::BadConfig, "unknown synthetic kind '" + std::string(name) + "'");
}

std::string_view synthetic_kind_name(SyntheticKind k) noexcept {
  switch (k) {
    case SyntheticKind::Sine: return "sine";
    case SyntheticKind::TrendPlusAR1: return "trend-ar1";
    case SyntheticKind::Zigzag: return "zigzag";
  }
  return "sine";
}

PriceSeries generate_synthetic(SyntheticKind kind, const SyntheticParams& p, std::uint64_t seed) {
  if (!(p.base > 0.0)) throw Error(Errc::BadParams, "base price must be > 0");
  PriceSeries out;
  out.ticker = p.ticker;
  out.frequency = Frequency::Custom;
  Rng rng(seed);

  switch (kind) {
    case SyntheticKind::Sine: {
      if (p.amplitude < 0.0 || p.period == 0 || p.noise_std < 0.0 || p.length == 0)
        throw Error(Errc::BadParams, "sine needs amplitude >= 0, period > 0, length > 0");
      out.closes.resize(p.length);
      for (std::size_t t = 0; t < p.length; ++t) {
        const double angle = 2.0 * std::numbers::pi * p.cycles * static_cast<double>(t) /
                                 static_cast<double>(p.period) +
                             p.phase;
        const double noise = p.noise_std > 0.0 ? p.noise_std * rng.gaussian() : 0.0;
        out.closes[t] = p.base * (1.0 + p.amplitude * (std::sin(angle) + noise));
      }
      break;
    }
    case SyntheticKind::TrendPlusAR1: {
      if (!(p.ar_coeff > -1.0 && p.ar_coeff < 1.0) || p.ar_sigma < 0.0 || p.length == 0)
        throw Error(Errc::BadParams, "AR coefficient must lie in (-1, 1)");
      out.closes.resize(p.length);
      double a = 0.0;
      for (std::size_t t = 0; t < p.length; ++t) {
        a = p.ar_coeff * a + p.ar_sigma * rng.gaussian();
        out.closes[t] = p.base * std::exp(p.drift * static_cast<double>(t) + a);
      }
      break;
    }
    case SyntheticKind::Zigzag: {
      out.closes.reserve(p.moves.size() + 1);
      out.closes.push_back(p.base);
      for (double m : p.moves) {
        if (!(m > -1.0)) throw Error(Errc::BadParams, "zigzag move must be > -100%");
        out.closes.push_back(out.closes.back() * (1.0 + m));
      }
      break;
    }
  }
  for (double c : out.closes)
    if (!(c > 0.0) || !std::isfinite(c))
      throw Error(Errc::BadParams, "parameters produce non-positive prices");

  out.timestamps.resize(out.closes.size());
  for (std::size_t t = 0; t < out.closes.size(); ++t)
    out.timestamps[t] = p.start_timestamp + static_cast<std::int64_t>(t) * p.step_seconds;
  return out;
}

}  // namespace diffden
