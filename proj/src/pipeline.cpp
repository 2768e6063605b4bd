#include "diffden/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "diffden/classifier.hpp"
#include "diffden/denoiser.hpp"
#include "diffden/error.hpp"
#include "diffden/evaluation.hpp"

namespace diffden {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "short write to " + path.string());
}

std::string threshold_key(double t) {
  std::ostringstream ss;
  ss << t;
  return ss.str();
}

// Collects several per-ticker reports into one by re-tallying their trades.
Json aggregate(const std::vector<BacktestReport>& reports, bool with_hits) {
  double lor = 0.0, lsr = 0.0;
  std::size_t n = 0, longs = 0, long_hits = 0, hits = 0;
  for (const auto& r : reports) {
    lor += r.lor;
    lsr += r.lsr;
    n += r.n_trades;
    for (const Trade& t : r.trades) {
      const bool hit = t.log_return > 0.0;
      if (t.direction == Direction::Long) {
        ++longs;
        if (hit) ++long_hits;
      }
      if (hit) ++hits;
    }
  }
  Json j{{"lor", lor}, {"lsr", lsr}, {"not", n}};
  if (with_hits) {
    j["lohr"] = longs ? static_cast<double>(long_hits) / static_cast<double>(longs) : 0.0;
    j["lshr"] = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  }
  return j;
}

struct SeriesData {
  PriceSeries raw;
  PriceSeries ema;
  std::size_t n_train = 0;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::IoError, "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return sha256_hex(ss.str());
}

std::string family_name(SdeKind kind) { return kind == SdeKind::VE ? "VE-SDE" : "VP-SDE"; }

WindowFile denoise_windows(const ScoreModel& model, const WindowFile& windows, const DenoiseConfig& cfg,
                           std::size_t batch, std::uint64_t stream_offset) {
  const std::size_t L = model.length();
  if (windows.train.length != L) throw Error(Errc::ShapeMismatch, "window length differs from model L");
  WindowFile out = windows;
  std::vector<Window*> all;
  for (Window& w : out.train.windows) all.push_back(&w);
  for (Window& w : out.test.windows) all.push_back(&w);

  std::vector<double> x;
  std::vector<std::uint64_t> streams;
  for (std::size_t start = 0; start < all.size(); start += batch) {
    const std::size_t rows = std::min(batch, all.size() - start);
    x.clear();
    streams.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& v = all[start + r]->values;
      x.insert(x.end(), v.begin(), v.end());
      streams.push_back(stream_offset + start + r);
    }
    auto res = denoise_batch(model, x, cfg, streams);
    for (std::size_t r = 0; r < rows; ++r) all[start + r]->values = std::move(res[r].denoised);
  }
  return out;
}

std::vector<double> causal_denoised(const ScoreModel& model, std::span<const double> series,
                                    std::span<const std::size_t> ends, const DenoiseConfig& cfg,
                                    std::size_t batch, std::uint64_t stream_offset) {
  const std::size_t L = model.length();
  std::vector<double> out(ends.size());
  std::vector<std::size_t> pending;
  std::vector<NormParams> norms;
  std::vector<double> x;
  std::vector<std::uint64_t> streams;

  auto flush = [&] {
    if (pending.empty()) return;
    auto res = denoise_batch(model, x, cfg, streams);
    for (std::size_t r = 0; r < pending.size(); ++r)
      out[pending[r]] = res[r].denoised.back() * norms[r].scale + norms[r].shift;
    pending.clear();
    norms.clear();
    x.clear();
    streams.clear();
  };

  for (std::size_t k = 0; k < ends.size(); ++k) {
    const std::size_t t = ends[k];
    if (t + 1 < L || t >= series.size()) throw Error(Errc::IndexOutOfRange, "causal window out of range");
    auto [values, norm] = normalize(series.subspan(t + 1 - L, L));
    if (norm.degenerate) {
      out[k] = series[t];
      continue;
    }
    pending.push_back(k);
    norms.push_back(norm);
    x.insert(x.end(), values.begin(), values.end());
    streams.push_back(stream_offset + k);
    if (pending.size() == batch) flush();
  }
  flush();
  return out;
}

RunReport pipeline_run(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.finalize();
  cfg.validate();

  const fs::path out_dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  RunReport report;
  Json metrics;
  metrics["schema_version"] = kReportSchemaVersion;
  std::map<std::string, std::string> input_digests;
  std::vector<std::string> artifacts;

  auto run_stage = [&](const std::string& name, auto&& body) {
    Stopwatch sw;
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.code(), "stage " + name + ": " + e.what());
    }
    report.timings.push_back({name, sw.seconds()});
  };

  auto emit = [&](const std::string& name, std::string_view bytes) {
    write_file(out_dir / name, bytes);
    artifacts.push_back(name);
  };

  std::vector<SeriesData> series;
  WindowFile ori, ema_w;
  const std::size_t L = cfg.ingest.length;

  run_stage("ingest", [&] {
    ori.train.length = ori.test.length = ema_w.train.length = ema_w.test.length = L;
    ori.train.stride = ori.test.stride = ema_w.train.stride = ema_w.test.stride = cfg.ingest.stride;
    ori.test.split = ema_w.test.split = Split::Test;
    for (const InputSpec& in : cfg.inputs) {
      input_digests[in.path] = sha256_file(in.path);
      SeriesData sd;
      sd.raw = load_csv(in.path, in.schema);
      sd.ema = ema_series(sd.raw, cfg.ema_decay);
      sd.n_train = static_cast<std::size_t>(
          std::floor(static_cast<double>(sd.raw.size()) * cfg.ingest.train_fraction));
      for (const auto& other : series)
        if (other.raw.ticker == sd.raw.ticker)
          throw Error(Errc::BadConfig, "duplicate ticker " + sd.raw.ticker);
      auto a = ingest_series(sd.raw, cfg.ingest);
      auto b = ingest_series(sd.ema, cfg.ingest);
      ori.train.windows.insert(ori.train.windows.end(), a.train.windows.begin(), a.train.windows.end());
      ori.test.windows.insert(ori.test.windows.end(), a.test.windows.begin(), a.test.windows.end());
      ema_w.train.windows.insert(ema_w.train.windows.end(), b.train.windows.begin(), b.train.windows.end());
      ema_w.test.windows.insert(ema_w.test.windows.end(), b.test.windows.begin(), b.test.windows.end());
      series.push_back(std::move(sd));
    }
    ori.meta["family"] = "Ori";
    ema_w.meta["family"] = "EMA";
    ema_w.meta["ema_decay"] = threshold_key(cfg.ema_decay);
    emit("windows_ori.csv", serialize_windows(ori));
    emit("windows_ema.csv", serialize_windows(ema_w));
    metrics["counts"] = {{"series", series.size()},
                         {"train_samples", ori.train.sample_count()},
                         {"test_samples", ori.test.sample_count()},
                         {"train_windows", ori.train.windows.size()},
                         {"test_windows", ori.test.windows.size()}};
  });

  std::map<std::string, WindowFile> families{{"Ori", ori}, {"EMA", ema_w}};
  std::vector<std::string> family_order{"Ori", "EMA"};
  std::map<SdeKind, ScoreModel> models;

  run_stage("train", [&] {
    Json tr;
    for (std::size_t i = 0; i < cfg.sde_kinds.size(); ++i) {
      const SdeKind kind = cfg.sde_kinds[i];
      SdeSpec spec = cfg.sde;
      spec.kind = kind;
      TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + 1000 * (static_cast<std::uint64_t>(kind) + 1);
      auto res = train_dsm(ema_w.train, spec, cfg.model, tc);
      const std::string name = "model_" + std::string(sde_kind_name(kind)) + ".bin";
      emit(name, serialize_model(res.model));
      tr[family_name(kind)] = {{"loss_curve", res.loss_curve}};
      models.emplace(kind, std::move(res.model));
    }
    metrics["training"] = tr;
  });

  run_stage("denoise", [&] {
    for (SdeKind kind : cfg.sde_kinds) {
      DenoiseConfig dc = cfg.denoise;
      WindowFile den = denoise_windows(models.at(kind), ema_w, dc, cfg.denoise_batch, 0);
      const std::string fam = family_name(kind);
      den.meta["family"] = fam;
      den.meta["t_prime"] = threshold_key(dc.t_prime);
      den.meta["corrector_steps"] = std::to_string(dc.corrector_steps);
      den.meta["omega"] = threshold_key(dc.omega);
      den.meta["eta_tv"] = threshold_key(dc.eta_tv);
      den.meta["eta_f"] = threshold_key(dc.eta_f);
      den.meta["fourier_threshold"] = threshold_key(dc.fourier_threshold);
      den.meta["n_seeds"] = std::to_string(dc.n_seeds);
      den.meta["corrector_snr"] = threshold_key(dc.corrector_snr);
      den.meta["base_seed"] = std::to_string(dc.base_seed);
      emit("windows_" + std::string(sde_kind_name(kind)) + ".csv", serialize_windows(den));
      families.emplace(fam, std::move(den));
      family_order.push_back(fam);
    }
  });
  metrics["families"] = family_order;

  std::map<std::string, FamilySplits> datasets;
  const auto seeds = cfg.classifier_seed_list();
  run_stage("classify", [&] {
    for (const auto& fam : family_order) {
      const WindowFile& wf = families.at(fam);
      FamilySplits splits;
      for (int h : cfg.ingest.horizons) {
        const auto hz = static_cast<std::size_t>(h);
        splits.train.emplace(hz, build_dataset(wf.train, hz, fam));
        splits.test.emplace(hz, build_dataset(wf.test, hz, fam));
      }
      datasets.emplace(fam, std::move(splits));
    }
    const ProtocolTable table = evaluate_protocol(datasets, seeds, cfg.classifier);
    Json cls = Json::parse(protocol_json(table, -1));
    Json ordered;
    for (const auto& fam : family_order) ordered[fam] = cls.at(fam);
    metrics["classification"] = ordered;
  });

  run_stage("dc-events", [&] {
    Json dc;
    for (const auto& fam : family_order) {
      const WindowFile& wf = families.at(fam);
      Json row;
      for (double th : cfg.dc_thresholds) {
        double total = 0.0;
        std::size_t n = 0, skipped = 0;
        for (const Window& w : wf.test.windows) {
          if (w.role != WindowRole::Sample) continue;
          const auto prices = w.denormalized();
          if (std::any_of(prices.begin(), prices.end(), [](double p) { return !(p > 0.0); })) {
            ++skipped;
            continue;
          }
          total += static_cast<double>(dc_events(prices, th).event_count);
          ++n;
        }
        row[threshold_key(th)] = {{"mean_count", n ? total / static_cast<double>(n) : 0.0},
                                  {"windows", n},
                                  {"skipped", skipped}};
      }
      dc[fam] = row;
    }
    metrics["dc_events"] = dc;
  });

  run_stage("backtest", [&] {
    Json sig;
    for (const auto& fam : family_order) {
      std::map<std::string, std::vector<BacktestReport>> by_strategy;
      for (std::size_t si = 0; si < series.size(); ++si) {
        const SeriesData& sd = series[si];
        const std::size_t n = sd.raw.size();
        const std::size_t points = std::min(cfg.backtest_points, n - sd.n_train);
        std::vector<std::size_t> ends;
        for (std::size_t t = n - points; t < n; ++t)
          if (t + 1 >= L) ends.push_back(t);
        std::vector<double> signal_series;
        if (fam == "Ori") {
          for (std::size_t t : ends) signal_series.push_back(sd.raw.closes[t]);
        } else if (fam == "EMA") {
          for (std::size_t t : ends) signal_series.push_back(sd.ema.closes[t]);
        } else {
          const SdeKind kind = fam == "VE-SDE" ? SdeKind::VE : SdeKind::VP;
          const std::uint64_t offset = (std::uint64_t{1} << 40) + (static_cast<std::uint64_t>(si) << 24);
          signal_series = causal_denoised(models.at(kind), sd.ema.closes, ends, cfg.denoise,
                                          cfg.denoise_batch, offset);
        }
        std::vector<double> trade(ends.size());
        for (std::size_t k = 0; k < ends.size(); ++k) trade[k] = sd.raw.closes[ends[k]];
        if (signal_series.size() <= cfg.strategy.macd.slow + cfg.strategy.macd.signal) continue;
        const Signal macd = macd_signals(signal_series, cfg.strategy.macd);
        const Signal boll = bollinger_signals(signal_series, cfg.strategy.bollinger);
        for (TradeMode mode : {TradeMode::LongOnly, TradeMode::LongShort}) {
          const std::string m(trade_mode_name(mode));
          by_strategy["macd/" + m].push_back(run_signal_backtest(macd, trade, mode));
          by_strategy["bollinger/" + m].push_back(run_signal_backtest(boll, trade, mode));
        }
      }
      Json f;
      for (const auto& [name, reps] : by_strategy) f[name] = aggregate(reps, false);
      sig[fam] = f;
    }
    metrics["signal_backtest"] = sig;

    // Prediction-driven strategies: first-seed classifier per (family, horizon).
    Json pred;
    for (const auto& fam : family_order) {
      Json f;
      for (int h : cfg.ingest.horizons) {
        const auto hz = static_cast<std::size_t>(h);
        const auto& splits = datasets.at(fam);
        BoostedTrees model = fit_boosted(cfg.classifier, splits.train.at(hz), seeds.front());
        const ClassifierDataset& test = splits.test.at(hz);
        const Prediction p = predict(model, test.features, test.width);
        Json hj;
        for (PredictionMode mode : {PredictionMode::Following, PredictionMode::Countering}) {
          std::vector<BacktestReport> reps;
          std::size_t dropped = 0;
          for (const SeriesData& sd : series) {
            std::vector<int> preds;
            std::vector<std::size_t> at;
            for (std::size_t r = 0; r < test.rows(); ++r) {
              if (test.tickers[r] != sd.raw.ticker) continue;
              if (test.end_indices[r] + 2 * hz >= sd.raw.size()) {
                ++dropped;
                continue;
              }
              preds.push_back(p.labels[r]);
              at.push_back(test.end_indices[r]);
            }
            reps.push_back(run_prediction_backtest(preds, at, sd.raw.closes, hz, mode));
          }
          Json a = aggregate(reps, true);
          a["dropped"] = dropped;
          hj[std::string(prediction_mode_name(mode))] = a;
        }
        f[std::to_string(h)] = hj;
      }
      pred[fam] = f;
    }
    metrics["prediction_backtest"] = pred;
  });

  report.metrics_json = metrics.dump(2) + "\n";
  emit("metrics.json", report.metrics_json);

  for (const auto& name : artifacts) report.digests[name] = sha256_file((out_dir / name).string());

  Json rep;
  rep["schema_version"] = kReportSchemaVersion;
  rep["config"] = Json::parse(config_to_json(cfg));
  Json stages = Json::array();
  for (const auto& t : report.timings) stages.push_back({{"stage", t.stage}, {"wall_seconds", t.wall_seconds}});
  rep["stages"] = stages;
  rep["inputs"] = input_digests;
  rep["artifacts"] = report.digests;
  rep["metrics"] = metrics;
  report.report_json = rep.dump(2) + "\n";
  write_file(out_dir / "run_report.json", report.report_json);
  return report;
}

}  // namespace diffden
