// diffden: command-line front end. Exit codes: 0 ok, 1 usage, 2 data or
// validation error, 3 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "diffden/backtest.hpp"
#include "diffden/classifier.hpp"
#include "diffden/config.hpp"
#include "diffden/data_ingest.hpp"
#include "diffden/denoiser.hpp"
#include "diffden/error.hpp"
#include "diffden/evaluation.hpp"
#include "diffden/kernels.hpp"
#include "diffden/pipeline.hpp"
#include "diffden/score_model.hpp"
#include "diffden/window_io.hpp"
#include "selftest.hpp"

namespace dd = diffden;
using Json = nlohmann::ordered_json;

namespace {

int verbosity() {
  const char* v = std::getenv("DIFFDEN_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (verbosity() >= 1) std::cerr << "diffden: " << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw dd::Error(dd::Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  if (path == "-") {
    std::cout << bytes;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw dd::Error(dd::Errc::IoError, "cannot write " + path);
  f << bytes;
}

// CSV schema from an optional JSON file (same keys as a config input entry,
// without "path") plus command-line overrides.
struct SchemaArgs {
  std::string file;
  std::string ticker;
  std::string timestamp_column;
  std::string close_column;
  std::string format;

  void add(CLI::App* app) {
    app->add_option("--schema", file, "JSON file with CSV column mapping");
    app->add_option("--ticker", ticker, "Ticker name when the CSV has no ticker column");
    app->add_option("--timestamp-column", timestamp_column, "Timestamp column name");
    app->add_option("--close-column", close_column, "Close column name");
    app->add_option("--format", format, "epoch | iso-date | iso-datetime | compact");
  }

  dd::CsvSchema build(const std::string& input_path) const {
    dd::CsvSchema s;
    if (!file.empty()) {
      auto j = nlohmann::json::parse(read_file(file), nullptr, true, true);
      j["path"] = input_path;
      dd::RunConfig tmp = dd::config_from_json(Json{{"inputs", Json::array({Json::parse(j.dump())})}}.dump());
      s = tmp.inputs.front().schema;
    }
    if (!ticker.empty()) s.ticker = ticker;
    if (!timestamp_column.empty()) s.timestamp_column = timestamp_column;
    if (!close_column.empty()) s.close_column = close_column;
    if (!format.empty()) s.format = dd::parse_timestamp_format(format);
    if (ticker.empty() && file.empty())
      s.ticker = std::filesystem::path(input_path).stem().string();
    return s;
  }
};

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoul(item)));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::string family_of(const dd::WindowFile& wf, const std::string& path) {
  auto it = wf.meta.find("family");
  return it != wf.meta.end() ? it->second : std::filesystem::path(path).stem().string();
}

// Timestamp,close CSV for signal series produced by `denoise --series`.
dd::PriceSeries load_plain_series(const std::string& path) {
  dd::CsvSchema s;
  s.ticker = std::filesystem::path(path).stem().string();
  return dd::load_csv(path, s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based denoising of financial time series"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Base seed for every random draw")->capture_default_str();

  // ---- generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic price CSV");
  std::string gen_kind = "sine", gen_out;
  dd::SyntheticParams gp;
  std::string gen_moves;
  gen->add_option("--kind", gen_kind, "sine | trend-ar1 | zigzag")->capture_default_str();
  gen->add_option("--length", gp.length)->capture_default_str();
  gen->add_option("--base", gp.base)->capture_default_str();
  gen->add_option("--amplitude", gp.amplitude)->capture_default_str();
  gen->add_option("--cycles", gp.cycles)->capture_default_str();
  gen->add_option("--period", gp.period)->capture_default_str();
  gen->add_option("--noise", gp.noise_std)->capture_default_str();
  gen->add_option("--drift", gp.drift)->capture_default_str();
  gen->add_option("--ar-coeff", gp.ar_coeff)->capture_default_str();
  gen->add_option("--ar-sigma", gp.ar_sigma)->capture_default_str();
  gen->add_option("--moves", gen_moves, "Comma-separated relative moves (zigzag)");
  gen->add_option("--ticker", gp.ticker)->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // ---- ingest
  auto* ing = app.add_subcommand("ingest", "Build normalized rolling windows from CSV prices");
  std::vector<std::string> ing_inputs;
  std::string ing_out, ing_family = "ori", ing_horizons = "1,5,10";
  dd::IngestOptions ing_opt;
  double ing_decay = 0.5;
  SchemaArgs ing_schema;
  ing->add_option("--input", ing_inputs, "Price CSV (repeatable)")->required();
  ing_schema.add(ing);
  ing->add_option("--window", ing_opt.length)->capture_default_str();
  ing->add_option("--stride", ing_opt.stride)->capture_default_str();
  ing->add_option("--split", ing_opt.train_fraction, "Train fraction")->capture_default_str();
  ing->add_option("--horizons", ing_horizons)->capture_default_str();
  ing->add_option("--family", ing_family, "ori | ema")->capture_default_str();
  ing->add_option("--ema-decay", ing_decay)->capture_default_str();
  ing->add_option("--out", ing_out)->required();

  // ---- train
  auto* tr = app.add_subcommand("train", "Train a conditional score model");
  std::string tr_data, tr_sde = "ve", tr_config, tr_out;
  dd::TrainConfig tc;
  dd::ModelShape shape;
  std::size_t tr_steps = 1000;
  tr->add_option("--data", tr_data, "Window file")->required();
  tr->add_option("--sde", tr_sde, "ve | vp")->capture_default_str();
  tr->add_option("--config", tr_config, "Run config supplying sde/model/train sections");
  tr->add_option("--epochs", tc.epochs);
  tr->add_option("--batch-size", tc.batch_size);
  tr->add_option("--lr", tc.learning_rate);
  tr->add_option("--p-uncond", tc.p_uncond);
  tr->add_option("--hidden", shape.hidden);
  tr->add_option("--depth", shape.depth);
  tr->add_option("--n-steps", tr_steps);
  tr->add_option("--out", tr_out)->required();

  // ---- denoise
  auto* den = app.add_subcommand("denoise", "Denoise windows (or a series, causally) with a model");
  std::string den_model, den_data, den_series, den_out;
  dd::DenoiseConfig dcfg;
  std::size_t den_batch = 256, den_points = 250;
  SchemaArgs den_schema;
  den->add_option("--model", den_model)->required();
  den->add_option("--data", den_data, "Window file");
  den->add_option("--series", den_series, "Price CSV; writes a causal denoised series instead");
  den_schema.add(den);
  den->add_option("--points", den_points, "Trailing points of --series to denoise")->capture_default_str();
  den->add_option("--t-prime", dcfg.t_prime)->capture_default_str();
  den->add_option("--seeds", dcfg.n_seeds)->capture_default_str();
  den->add_option("--omega", dcfg.omega)->capture_default_str();
  den->add_option("--eta-tv", dcfg.eta_tv)->capture_default_str();
  den->add_option("--eta-f", dcfg.eta_f)->capture_default_str();
  den->add_option("--fourier-threshold", dcfg.fourier_threshold)->capture_default_str();
  den->add_option("--corrector-steps", dcfg.corrector_steps)->capture_default_str();
  den->add_option("--snr", dcfg.corrector_snr)->capture_default_str();
  den->add_option("--batch", den_batch)->capture_default_str();
  den->add_option("--out", den_out)->required();

  // ---- classify
  auto* cls = app.add_subcommand("classify", "Future-return classification protocol");
  std::vector<std::string> cls_data;
  std::string cls_train, cls_test, cls_horizons = "1,5,10", cls_out = "-", cls_pred_out;
  std::size_t cls_seeds = 5;
  dd::BoostedTreesConfig bcfg;
  cls->add_option("--data", cls_data, "Window file holding both splits (repeatable)");
  cls->add_option("--train", cls_train, "Train window file");
  cls->add_option("--test", cls_test, "Test window file");
  cls->add_option("--horizons", cls_horizons)->capture_default_str();
  cls->add_option("--seeds", cls_seeds)->capture_default_str();
  cls->add_option("--rounds", bcfg.n_rounds)->capture_default_str();
  cls->add_option("--predictions-out", cls_pred_out, "CSV of first-seed test predictions");
  cls->add_option("--out", cls_out)->capture_default_str();

  // ---- dc-events
  auto* dce = app.add_subcommand("dc-events", "Directional-change event counts");
  std::string dce_data, dce_thresholds = "0.01,0.02,0.03", dce_split = "test", dce_out = "-", dce_csv;
  dce->add_option("--data", dce_data, "Window file")->required();
  dce->add_option("--thresholds", dce_thresholds)->capture_default_str();
  dce->add_option("--split", dce_split, "train | test")->capture_default_str();
  dce->add_option("--csv", dce_csv, "Per-window counts CSV");
  dce->add_option("--out", dce_out)->capture_default_str();

  // ---- backtest
  auto* bt = app.add_subcommand("backtest", "MACD / Bollinger backtest: signals from one series, trades on another");
  std::string bt_signals, bt_prices, bt_strategy = "macd", bt_mode = "long-only", bt_out = "-";
  SchemaArgs bt_schema;
  dd::StrategyParams sp;
  bt->add_option("--signals-from", bt_signals, "timestamp,close CSV of the signal series")->required();
  bt->add_option("--prices", bt_prices, "Original price CSV")->required();
  bt_schema.add(bt);
  bt->add_option("--strategy", bt_strategy, "macd | bollinger")->capture_default_str();
  bt->add_option("--mode", bt_mode, "long-only | long-short")->capture_default_str();
  bt->add_option("--out", bt_out)->capture_default_str();

  // ---- backtest-pred
  auto* bp = app.add_subcommand("backtest-pred", "Prediction-stage / action-stage backtest");
  std::string bp_preds, bp_prices, bp_mode = "following", bp_out = "-";
  std::size_t bp_horizon = 1;
  SchemaArgs bp_schema;
  bp->add_option("--predictions", bp_preds, "CSV with end_timestamp and prediction columns")->required();
  bp->add_option("--prices", bp_prices)->required();
  bp_schema.add(bp);
  bp->add_option("--horizon", bp_horizon)->capture_default_str();
  bp->add_option("--mode", bp_mode, "following | countering")->capture_default_str();
  bp->add_option("--out", bp_out)->capture_default_str();

  // ---- report
  auto* rep = app.add_subcommand("report", "Run the full pipeline from a config file");
  std::string rep_config;
  rep->add_option("--config", rep_config)->required();

  // ---- selftest
  auto* st = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 1;
  }

  try {
    if (*gen) {
      const auto kind = dd::parse_synthetic_kind(gen_kind);
      gp.moves = parse_double_list(gen_moves);
      write_file(gen_out, dd::to_csv(dd::generate_synthetic(kind, gp, seed)));
    } else if (*ing) {
      ing_opt.horizons.clear();
      for (std::size_t h : parse_size_list(ing_horizons)) ing_opt.horizons.push_back(static_cast<int>(h));
      dd::WindowFile wf;
      wf.train.length = wf.test.length = ing_opt.length;
      wf.train.stride = wf.test.stride = ing_opt.stride;
      wf.test.split = dd::Split::Test;
      if (ing_family != "ori" && ing_family != "ema")
        throw dd::Error(dd::Errc::Usage, "--family must be ori or ema");
      for (const auto& path : ing_inputs) {
        dd::PriceSeries s = dd::load_csv(path, ing_schema.build(path));
        if (ing_family == "ema") s = dd::ema_series(s, ing_decay);
        auto split = dd::ingest_series(s, ing_opt);
        wf.train.windows.insert(wf.train.windows.end(), split.train.windows.begin(), split.train.windows.end());
        wf.test.windows.insert(wf.test.windows.end(), split.test.windows.begin(), split.test.windows.end());
      }
      wf.meta["family"] = ing_family == "ori" ? "Ori" : "EMA";
      dd::save_windows(wf, ing_out);
      log_info("wrote " + std::to_string(wf.train.windows.size() + wf.test.windows.size()) + " windows to " + ing_out);
    } else if (*tr) {
      dd::SdeSpec spec;
      dd::ModelShape ms = shape;
      dd::TrainConfig t = tc;
      if (!tr_config.empty()) {
        const dd::RunConfig rc = dd::load_config(tr_config);
        spec = rc.sde;
        ms = rc.model;
        t = rc.train;
      } else {
        spec.n_steps = tr_steps;
      }
      // Explicit flags win over the config file.
      if (tr->count("--epochs")) t.epochs = tc.epochs;
      if (tr->count("--batch-size")) t.batch_size = tc.batch_size;
      if (tr->count("--lr")) t.learning_rate = tc.learning_rate;
      if (tr->count("--p-uncond")) t.p_uncond = tc.p_uncond;
      if (tr->count("--hidden")) ms.hidden = shape.hidden;
      if (tr->count("--depth")) ms.depth = shape.depth;
      if (tr->count("--n-steps")) spec.n_steps = tr_steps;
      spec.kind = dd::parse_sde_kind(tr_sde);
      t.seed = seed;
      const dd::WindowFile wf = dd::load_windows(tr_data);
      ms.length = wf.train.length;
      auto res = dd::train_dsm(wf.train, spec, ms, t);
      dd::save_model(res.model, tr_out);
      log_info("final epoch loss " + std::to_string(res.loss_curve.back()));
    } else if (*den) {
      const dd::ScoreModel model = dd::load_model(den_model);
      dcfg.base_seed = seed;
      if (!den_series.empty()) {
        const dd::PriceSeries s = dd::load_csv(den_series, den_schema.build(den_series));
        const std::size_t L = model.length();
        if (s.size() < L) throw dd::Error(dd::Errc::SeriesTooShort, "series shorter than the model window");
        std::vector<std::size_t> ends;
        for (std::size_t t = s.size() - std::min(den_points, s.size() - L + 1); t < s.size(); ++t) ends.push_back(t);
        const auto values = dd::causal_denoised(model, s.closes, ends, dcfg, den_batch, 0);
        std::string out = "timestamp,close\n";
        char buf[64];
        for (std::size_t k = 0; k < ends.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%.17g", values[k]);
          out += std::to_string(s.timestamps[ends[k]]) + "," + buf + "\n";
        }
        write_file(den_out, out);
      } else {
        if (den_data.empty()) throw dd::Error(dd::Errc::Usage, "denoise needs --data or --series");
        const dd::WindowFile wf = dd::load_windows(den_data);
        dd::WindowFile out = dd::denoise_windows(model, wf, dcfg, den_batch, 0);
        out.meta["family"] = dd::family_name(model.sde().kind);
        out.meta["t_prime"] = std::to_string(dcfg.t_prime);
        out.meta["n_seeds"] = std::to_string(dcfg.n_seeds);
        out.meta["omega"] = std::to_string(dcfg.omega);
        out.meta["eta_tv"] = std::to_string(dcfg.eta_tv);
        out.meta["eta_f"] = std::to_string(dcfg.eta_f);
        out.meta["fourier_threshold"] = std::to_string(dcfg.fourier_threshold);
        out.meta["corrector_steps"] = std::to_string(dcfg.corrector_steps);
        out.meta["corrector_snr"] = std::to_string(dcfg.corrector_snr);
        out.meta["base_seed"] = std::to_string(dcfg.base_seed);
        dd::save_windows(out, den_out);
      }
    } else if (*cls) {
      const auto horizons = parse_size_list(cls_horizons);
      std::map<std::string, dd::FamilySplits> data;
      auto add = [&](const std::string& fam, const dd::WindowSet& train, const dd::WindowSet& test) {
        dd::FamilySplits fs;
        for (std::size_t h : horizons) {
          fs.train.emplace(h, dd::build_dataset(train, h, fam));
          fs.test.emplace(h, dd::build_dataset(test, h, fam));
        }
        data[fam] = std::move(fs);
      };
      for (const auto& path : cls_data) {
        const dd::WindowFile wf = dd::load_windows(path);
        add(family_of(wf, path), wf.train, wf.test);
      }
      if (!cls_train.empty() || !cls_test.empty()) {
        if (cls_train.empty() || cls_test.empty())
          throw dd::Error(dd::Errc::Usage, "--train and --test go together");
        const dd::WindowFile a = dd::load_windows(cls_train), b = dd::load_windows(cls_test);
        add(family_of(a, cls_train), a.train.windows.empty() ? a.test : a.train,
            b.test.windows.empty() ? b.train : b.test);
      }
      if (data.empty()) throw dd::Error(dd::Errc::Usage, "classify needs --data or --train/--test");
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < cls_seeds; ++i) seeds.push_back(seed + i);
      const auto table = dd::evaluate_protocol(data, seeds, bcfg);
      write_file(cls_out, dd::protocol_json(table) + "\n");
      if (!cls_pred_out.empty()) {
        std::string out = "family,horizon,ticker,end_index,prediction,probability,label\n";
        for (const auto& [fam, fs] : data) {
          for (std::size_t h : horizons) {
            const auto model = dd::fit_boosted(bcfg, fs.train.at(h), seeds.front());
            const auto& test = fs.test.at(h);
            const auto p = dd::predict(model, test.features, test.width);
            for (std::size_t r = 0; r < test.rows(); ++r) {
              char buf[64];
              std::snprintf(buf, sizeof buf, "%.17g", p.probabilities[r]);
              out += fam + "," + std::to_string(h) + "," + test.tickers[r] + "," +
                     std::to_string(test.end_indices[r]) + "," + std::to_string(p.labels[r]) + "," + buf +
                     "," + std::to_string(test.labels[r]) + "\n";
            }
          }
        }
        write_file(cls_pred_out, out);
      }
    } else if (*dce) {
      const dd::WindowFile wf = dd::load_windows(dce_data);
      const dd::WindowSet& set = dce_split == "train" ? wf.train : wf.test;
      const auto thresholds = parse_double_list(dce_thresholds);
      Json j;
      std::string csv = "ticker,origin_index";
      for (double t : thresholds) csv += "," + std::to_string(t);
      csv += "\n";
      std::vector<double> totals(thresholds.size(), 0.0);
      std::size_t n = 0;
      for (const auto& w : set.windows) {
        if (w.role != dd::WindowRole::Sample) continue;
        const auto prices = w.denormalized();
        csv += w.source_ticker + "," + std::to_string(w.origin_index);
        for (std::size_t k = 0; k < thresholds.size(); ++k) {
          const auto c = dd::dc_events(prices, thresholds[k]).event_count;
          totals[k] += static_cast<double>(c);
          csv += "," + std::to_string(c);
        }
        csv += "\n";
        ++n;
      }
      if (n == 0) throw dd::Error(dd::Errc::EmptyInput, "no sample windows in the chosen split");
      for (std::size_t k = 0; k < thresholds.size(); ++k) {
        std::ostringstream key;
        key << thresholds[k];
        j[key.str()] = totals[k] / static_cast<double>(n);
      }
      write_file(dce_out, j.dump(2) + "\n");
      if (!dce_csv.empty()) write_file(dce_csv, csv);
    } else if (*bt) {
      const dd::PriceSeries sig = load_plain_series(bt_signals);
      const dd::PriceSeries prices = dd::load_csv(bt_prices, bt_schema.build(bt_prices));
      // Trade on the price rows covered by the signal series.
      auto first = std::find(prices.timestamps.begin(), prices.timestamps.end(), sig.timestamps.front());
      if (first == prices.timestamps.end())
        throw dd::Error(dd::Errc::Misalignment, "signal series starts at a timestamp absent from the prices");
      const auto off = static_cast<std::size_t>(first - prices.timestamps.begin());
      if (off + sig.size() > prices.size())
        throw dd::Error(dd::Errc::Misalignment, "signal series runs past the prices");
      dd::PriceSeries window = prices;
      window.timestamps.assign(prices.timestamps.begin() + static_cast<std::ptrdiff_t>(off),
                               prices.timestamps.begin() + static_cast<std::ptrdiff_t>(off + sig.size()));
      window.closes.assign(prices.closes.begin() + static_cast<std::ptrdiff_t>(off),
                           prices.closes.begin() + static_cast<std::ptrdiff_t>(off + sig.size()));
      dd::Signal s;
      if (bt_strategy == "macd") s = dd::macd_signals(sig.closes, sp.macd);
      else if (bt_strategy == "bollinger") s = dd::bollinger_signals(sig.closes, sp.bollinger);
      else throw dd::Error(dd::Errc::Usage, "--strategy must be macd or bollinger");
      auto r = dd::run_signal_backtest(s, sig.timestamps, window, dd::parse_trade_mode(bt_mode));
      r.strategy = bt_strategy + "/" + bt_mode;
      write_file(bt_out, r.to_json() + "\n");
    } else if (*bp) {
      const dd::PriceSeries prices = dd::load_csv(bp_prices, bp_schema.build(bp_prices));
      // Accepts the classify --predictions-out layout (end_index column) or a
      // plain end_timestamp,prediction CSV.
      const std::string text = read_file(bp_preds);
      std::istringstream in(text);
      std::string line;
      std::getline(in, line);
      std::vector<std::string> header;
      {
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
      }
      auto col = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
          if (header[i] == name) return static_cast<int>(i);
        return -1;
      };
      const int c_idx = col("end_index"), c_ts = col("end_timestamp"), c_pred = col("prediction");
      const int c_h = col("horizon");
      if (c_pred < 0 || (c_idx < 0 && c_ts < 0))
        throw dd::Error(dd::Errc::MalformedRow, "predictions need prediction and end_index or end_timestamp columns");
      std::vector<int> preds;
      std::vector<std::size_t> at;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < header.size()) throw dd::Error(dd::Errc::MalformedRow, "short predictions row");
        if (c_h >= 0 && std::stoul(cells[static_cast<std::size_t>(c_h)]) != bp_horizon) continue;
        std::size_t idx = 0;
        if (c_idx >= 0) {
          idx = std::stoul(cells[static_cast<std::size_t>(c_idx)]);
        } else {
          const std::int64_t ts = std::stoll(cells[static_cast<std::size_t>(c_ts)]);
          auto it = std::lower_bound(prices.timestamps.begin(), prices.timestamps.end(), ts);
          if (it == prices.timestamps.end() || *it != ts)
            throw dd::Error(dd::Errc::Misalignment, "prediction timestamp absent from prices");
          idx = static_cast<std::size_t>(it - prices.timestamps.begin());
        }
        preds.push_back(std::stoi(cells[static_cast<std::size_t>(c_pred)]));
        at.push_back(idx);
      }
      auto r = dd::run_prediction_backtest(preds, at, prices.closes, bp_horizon, dd::parse_prediction_mode(bp_mode));
      write_file(bp_out, r.to_json() + "\n");
    } else if (*rep) {
      dd::RunConfig cfg = dd::load_config(rep_config);
      if (app.count("--seed")) {
        cfg.seed = seed;
        cfg.finalize();
      }
      const auto report = dd::pipeline_run(cfg);
      for (const auto& t : report.timings) log_info(t.stage + " " + std::to_string(t.wall_seconds) + " s");
      log_info("wrote " + (std::filesystem::path(cfg.output_dir) / "run_report.json").string());
    } else if (*st) {
      return diffden_selftest::run(std::cout) ? 0 : 3;
    }
  } catch (const dd::Error& e) {
    std::cerr << "diffden: " << e.what() << "\n";
    switch (e.kind()) {
      case dd::ErrorKind::Usage: return 1;
      case dd::ErrorKind::Data: return 2;
      case dd::ErrorKind::Numeric: return 3;
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "diffden: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "diffden: bad number in a list argument\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "diffden: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
