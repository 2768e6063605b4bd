#include "diffden/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "diffden/error.hpp"

namespace diffden {
namespace {

using Json = nlohmann::ordered_json;

// Reads fields out of one JSON object and complains about anything left over.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(Errc::BadConfig, path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::BadConfig, path_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw Error(Errc::BadConfig, "unknown key " + path_ + "." + it.key());
  }

  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json schema_to_json(const InputSpec& in) {
  const CsvSchema& s = in.schema;
  return Json{{"path", in.path},
              {"ticker", s.ticker},
              {"timestamp_column", s.timestamp_column},
              {"time_column", s.time_column},
              {"close_column", s.close_column},
              {"ticker_column", s.ticker_column},
              {"format", std::string(timestamp_format_name(s.format))},
              {"delimiter", std::string(1, s.delimiter)},
              {"frequency", std::string(frequency_name(s.frequency))}};
}

InputSpec input_from_json(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  InputSpec in;
  std::string format(timestamp_format_name(in.schema.format));
  std::string delim(1, in.schema.delimiter);
  std::string freq(frequency_name(in.schema.frequency));
  r.get("path", in.path);
  r.get("ticker", in.schema.ticker);
  r.get("timestamp_column", in.schema.timestamp_column);
  r.get("time_column", in.schema.time_column);
  r.get("close_column", in.schema.close_column);
  r.get("ticker_column", in.schema.ticker_column);
  r.get("format", format);
  r.get("delimiter", delim);
  r.get("frequency", freq);
  r.finish();
  if (in.path.empty()) throw Error(Errc::BadConfig, path + ".path is required");
  if (delim.size() != 1) throw Error(Errc::BadConfig, path + ".delimiter must be one character");
  in.schema.format = parse_timestamp_format(format);
  in.schema.delimiter = delim[0];
  in.schema.frequency = parse_frequency(freq);
  return in;
}

}  // namespace

bool InputSpec::operator==(const InputSpec& o) const {
  const CsvSchema &a = schema, &b = o.schema;
  return path == o.path && a.timestamp_column == b.timestamp_column && a.time_column == b.time_column &&
         a.close_column == b.close_column && a.ticker_column == b.ticker_column && a.format == b.format &&
         a.delimiter == b.delimiter && a.ticker == b.ticker && a.frequency == b.frequency;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return seed == o.seed && output_dir == o.output_dir && inputs == o.inputs &&
         ingest.length == o.ingest.length && ingest.stride == o.ingest.stride &&
         ingest.train_fraction == o.ingest.train_fraction && ingest.horizons == o.ingest.horizons &&
         ema_decay == o.ema_decay && sde_kinds == o.sde_kinds && sde == o.sde && model == o.model &&
         train == o.train && denoise == o.denoise && denoise_batch == o.denoise_batch &&
         classifier == o.classifier && classifier_seeds == o.classifier_seeds &&
         dc_thresholds == o.dc_thresholds && strategy == o.strategy && backtest_points == o.backtest_points;
}

void RunConfig::finalize() {
  model.length = ingest.length;
  train.seed = seed;
  denoise.base_seed = seed + 0x100;
  sde.kind = SdeKind::VE;
}

std::vector<std::uint64_t> RunConfig::classifier_seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < classifier_seeds; ++i) out.push_back(seed + i);
  return out;
}

void RunConfig::validate() const {
  if (inputs.empty()) throw Error(Errc::BadConfig, "at least one input is required");
  if (sde_kinds.empty()) throw Error(Errc::BadConfig, "sde.kinds must not be empty");
  for (std::size_t i = 0; i < sde_kinds.size(); ++i)
    for (std::size_t j = i + 1; j < sde_kinds.size(); ++j)
      if (sde_kinds[i] == sde_kinds[j]) throw Error(Errc::BadConfig, "sde.kinds has duplicates");
  if (ingest.horizons.empty()) throw Error(Errc::BadConfig, "ingest.horizons must not be empty");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw Error(Errc::BadConfig, "ingest.ema_decay must lie in (0, 1)");
  for (SdeKind k : sde_kinds) {
    SdeSpec s = sde;
    s.kind = k;
    s.validate();
    denoise.validate(s);
  }
  model.validate();
  train.validate();
  classifier.validate();
  if (classifier_seeds < 1) throw Error(Errc::BadConfig, "classifier.n_seeds must be >= 1");
  if (denoise_batch < 1) throw Error(Errc::BadConfig, "denoise.batch_size must be >= 1");
  for (double t : dc_thresholds)
    if (!(t > 0.0)) throw Error(Errc::BadConfig, "dc thresholds must be > 0");
  const std::size_t need = std::max(strategy.macd.slow + strategy.macd.signal, strategy.bollinger.window) + 1;
  if (backtest_points < need)
    throw Error(Errc::BadConfig, "backtest.points must exceed the strategy warmup (" + std::to_string(need) + ")");
}

std::string config_to_json(const RunConfig& c, int indent) {
  Json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["inputs"] = Json::array();
  for (const InputSpec& in : c.inputs) j["inputs"].push_back(schema_to_json(in));
  j["ingest"] = {{"window", c.ingest.length},
                 {"stride", c.ingest.stride},
                 {"train_fraction", c.ingest.train_fraction},
                 {"horizons", c.ingest.horizons},
                 {"ema_decay", c.ema_decay}};
  Json kinds = Json::array();
  for (SdeKind k : c.sde_kinds) kinds.push_back(std::string(sde_kind_name(k)));
  j["sde"] = {{"kinds", kinds},
              {"n_steps", c.sde.n_steps},
              {"sigma_min", c.sde.sigma_min},
              {"sigma_max", c.sde.sigma_max},
              {"beta_min", c.sde.beta_min},
              {"beta_max", c.sde.beta_max}};
  j["model"] = {{"embed_dim", c.model.embed_dim}, {"hidden", c.model.hidden}, {"depth", c.model.depth}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"p_uncond", c.train.p_uncond},
                {"grad_clip", c.train.grad_clip}};
  j["denoise"] = {{"t_prime", c.denoise.t_prime},
                  {"corrector_steps", c.denoise.corrector_steps},
                  {"omega", c.denoise.omega},
                  {"eta_tv", c.denoise.eta_tv},
                  {"eta_f", c.denoise.eta_f},
                  {"fourier_threshold", c.denoise.fourier_threshold},
                  {"n_seeds", c.denoise.n_seeds},
                  {"corrector_snr", c.denoise.corrector_snr},
                  {"batch_size", c.denoise_batch}};
  const BoostedTreesConfig& b = c.classifier;
  j["classifier"] = {{"n_rounds", b.n_rounds},       {"max_depth", b.max_depth},
                     {"learning_rate", b.learning_rate}, {"n_bins", b.n_bins},
                     {"min_samples_leaf", b.min_samples_leaf}, {"l2", b.l2},
                     {"subsample", b.subsample},     {"colsample", b.colsample},
                     {"n_seeds", c.classifier_seeds}};
  j["dc"] = {{"thresholds", c.dc_thresholds}};
  j["backtest"] = {{"macd",
                    {{"fast", c.strategy.macd.fast},
                     {"slow", c.strategy.macd.slow},
                     {"signal", c.strategy.macd.signal}}},
                   {"bollinger", {{"window", c.strategy.bollinger.window}, {"k", c.strategy.bollinger.k}}},
                   {"points", c.backtest_points}};
  return j.dump(indent);
}

RunConfig config_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::BadConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader root(j, "config");
  int version = kConfigSchemaVersion;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw Error(Errc::VersionMismatch, "config schema_version " + std::to_string(version));
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);

  if (const Json* inputs = root.child("inputs")) {
    if (!inputs->is_array()) throw Error(Errc::BadConfig, "config.inputs must be an array");
    for (std::size_t i = 0; i < inputs->size(); ++i)
      c.inputs.push_back(input_from_json((*inputs)[i], "config.inputs[" + std::to_string(i) + "]"));
  }
  if (const Json* s = root.child("ingest")) {
    ObjectReader r(*s, "config.ingest");
    r.get("window", c.ingest.length);
    r.get("stride", c.ingest.stride);
    r.get("train_fraction", c.ingest.train_fraction);
    r.get("horizons", c.ingest.horizons);
    r.get("ema_decay", c.ema_decay);
    r.finish();
  }
  if (const Json* s = root.child("sde")) {
    ObjectReader r(*s, "config.sde");
    std::vector<std::string> kinds;
    for (SdeKind k : c.sde_kinds) kinds.emplace_back(sde_kind_name(k));
    r.get("kinds", kinds);
    c.sde_kinds.clear();
    for (const auto& k : kinds) c.sde_kinds.push_back(parse_sde_kind(k));
    r.get("n_steps", c.sde.n_steps);
    r.get("sigma_min", c.sde.sigma_min);
    r.get("sigma_max", c.sde.sigma_max);
    r.get("beta_min", c.sde.beta_min);
    r.get("beta_max", c.sde.beta_max);
    r.finish();
  }
  if (const Json* s = root.child("model")) {
    ObjectReader r(*s, "config.model");
    r.get("embed_dim", c.model.embed_dim);
    r.get("hidden", c.model.hidden);
    r.get("depth", c.model.depth);
    r.finish();
  }
  if (const Json* s = root.child("train")) {
    ObjectReader r(*s, "config.train");
    r.get("epochs", c.train.epochs);
    r.get("batch_size", c.train.batch_size);
    r.get("learning_rate", c.train.learning_rate);
    r.get("p_uncond", c.train.p_uncond);
    r.get("grad_clip", c.train.grad_clip);
    r.finish();
  }
  if (const Json* s = root.child("denoise")) {
    ObjectReader r(*s, "config.denoise");
    r.get("t_prime", c.denoise.t_prime);
    r.get("corrector_steps", c.denoise.corrector_steps);
    r.get("omega", c.denoise.omega);
    r.get("eta_tv", c.denoise.eta_tv);
    r.get("eta_f", c.denoise.eta_f);
    r.get("fourier_threshold", c.denoise.fourier_threshold);
    r.get("n_seeds", c.denoise.n_seeds);
    r.get("corrector_snr", c.denoise.corrector_snr);
    r.get("batch_size", c.denoise_batch);
    r.finish();
  }
  if (const Json* s = root.child("classifier")) {
    ObjectReader r(*s, "config.classifier");
    r.get("n_rounds", c.classifier.n_rounds);
    r.get("max_depth", c.classifier.max_depth);
    r.get("learning_rate", c.classifier.learning_rate);
    r.get("n_bins", c.classifier.n_bins);
    r.get("min_samples_leaf", c.classifier.min_samples_leaf);
    r.get("l2", c.classifier.l2);
    r.get("subsample", c.classifier.subsample);
    r.get("colsample", c.classifier.colsample);
    r.get("n_seeds", c.classifier_seeds);
    r.finish();
  }
  if (const Json* s = root.child("dc")) {
    ObjectReader r(*s, "config.dc");
    r.get("thresholds", c.dc_thresholds);
    r.finish();
  }
  if (const Json* s = root.child("backtest")) {
    ObjectReader r(*s, "config.backtest");
    if (const Json* m = r.child("macd")) {
      ObjectReader mr(*m, "config.backtest.macd");
      mr.get("fast", c.strategy.macd.fast);
      mr.get("slow", c.strategy.macd.slow);
      mr.get("signal", c.strategy.macd.signal);
      mr.finish();
    }
    if (const Json* b = r.child("bollinger")) {
      ObjectReader br(*b, "config.backtest.bollinger");
      br.get("window", c.strategy.bollinger.window);
      br.get("k", c.strategy.bollinger.k);
      br.finish();
    }
    r.get("points", c.backtest_points);
    r.finish();
  }
  root.finish();
  c.finalize();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace diffden
