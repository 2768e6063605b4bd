#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "diffden/config.hpp"
#include "diffden/error.hpp"
#include "diffden/rng.hpp"
#include "diffden/window_io.hpp"

namespace dd = diffden;

namespace {

// Values built from ratios with few significant digits so any lossy
// formatting would show up as a mismatch rather than being masked.
dd::RunConfig random_config(dd::Rng& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng.next_u64() % (hi - lo + 1); };
  auto real = [&](double lo, double hi) { return rng.uniform(lo, hi); };
  dd::RunConfig c;
  c.seed = rng.next_u64();
  c.output_dir = "out/run" + std::to_string(pick(0, 999));
  for (std::size_t i = 0, n = pick(1, 3); i < n; ++i) {
    dd::InputSpec in;
    in.path = "data/s" + std::to_string(i) + ".csv";
    in.schema.ticker = "T" + std::to_string(i);
    in.schema.close_column = i % 2 ? "Adj Close" : "close";
    in.schema.format = static_cast<dd::TimestampFormat>(pick(0, 3));
    if (in.schema.format == dd::TimestampFormat::Compact) in.schema.time_column = "time";
    in.schema.delimiter = i % 2 ? ';' : ',';
    in.schema.frequency = static_cast<dd::Frequency>(pick(0, 3));
    if (pick(0, 1)) in.schema.ticker_column = "sym";
    c.inputs.push_back(in);
  }
  c.ingest.length = pick(8, 120);
  c.ingest.stride = pick(1, 30);
  c.ingest.train_fraction = real(0.5, 0.95);
  c.ingest.horizons.clear();
  for (std::size_t i = 0, n = pick(1, 4); i < n; ++i) c.ingest.horizons.push_back(static_cast<int>(pick(1, 20)));
  c.ema_decay = real(0.05, 0.95);
  c.sde_kinds = pick(0, 1) ? std::vector<dd::SdeKind>{dd::SdeKind::VP} : std::vector<dd::SdeKind>{dd::SdeKind::VE, dd::SdeKind::VP};
  c.sde.n_steps = pick(10, 2000);
  c.sde.sigma_min = real(1e-3, 0.1);
  c.sde.sigma_max = real(0.5, 50.0);
  c.sde.beta_min = real(0.01, 1.0);
  c.sde.beta_max = real(5.0, 30.0);
  c.model.embed_dim = 2 * pick(2, 32);
  c.model.hidden = pick(4, 256);
  c.model.depth = pick(0, 5);
  c.train.epochs = pick(1, 100);
  c.train.batch_size = pick(1, 256);
  c.train.learning_rate = real(1e-5, 1e-2);
  c.train.p_uncond = real(0.0, 0.5);
  c.train.grad_clip = real(0.0, 5.0);
  c.denoise.t_prime = real(0.1, 0.9);
  c.denoise.corrector_steps = pick(0, 3);
  c.denoise.omega = real(-1.0, 4.0);
  c.denoise.eta_tv = real(0.0, 0.5);
  c.denoise.eta_f = real(0.0, 0.5);
  c.denoise.fourier_threshold = real(0.0, 0.5);
  c.denoise.n_seeds = pick(1, 20);
  c.denoise.corrector_snr = real(0.01, 0.5);
  c.denoise_batch = pick(1, 1024);
  c.classifier.n_rounds = pick(1, 500);
  c.classifier.max_depth = pick(1, 6);
  c.classifier.learning_rate = real(0.01, 0.5);
  c.classifier.n_bins = pick(2, 256);
  c.classifier.min_samples_leaf = pick(1, 20);
  c.classifier.l2 = real(0.0, 5.0);
  c.classifier.subsample = real(0.1, 1.0);
  c.classifier.colsample = real(0.1, 1.0);
  c.classifier_seeds = pick(1, 10);
  c.dc_thresholds = {real(0.001, 0.01), real(0.01, 0.05)};
  c.strategy.macd = {pick(2, 10), pick(11, 30), pick(2, 12)};
  c.strategy.bollinger = {pick(5, 40), real(0.5, 3.0)};
  c.backtest_points = pick(100, 1000);
  c.finalize();
  return c;
}

dd::Errc errc_of_parse(const std::string& text) {
  try {
    dd::config_from_json(text);
  } catch (const dd::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return dd::Errc::Usage;
}

}  // namespace

TEST(Config, RoundTripsHundredRandomConfigs) {
  dd::Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_config(rng);
    const auto text = dd::config_to_json(c);
    const auto back = dd::config_from_json(text);
    ASSERT_TRUE(back == c) << text;
    EXPECT_EQ(dd::config_to_json(back), text);
  }
}

TEST(Config, DefaultsFillMissingKeysAndDerivedSeeds) {
  const auto c = dd::config_from_json(R"({"seed": 9, "inputs": [{"path": "a.csv"}], "ingest": {"window": 40}})");
  EXPECT_EQ(c.ingest.length, 40u);
  EXPECT_EQ(c.model.length, 40u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.denoise.base_seed, 9u + 0x100u);
  EXPECT_EQ(c.classifier_seed_list(), (std::vector<std::uint64_t>{9, 10, 11, 12, 13}));
  EXPECT_EQ(c.denoise, [] {
    dd::DenoiseConfig d;
    d.base_seed = 9 + 0x100;
    return d;
  }());
  c.validate();
}

TEST(Config, CommentsAreAllowed) {
  const auto c = dd::config_from_json("// header\n{\n  \"seed\": 3, /* inline */\n  \"inputs\": [{\"path\": \"a.csv\"}]\n}\n");
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  EXPECT_EQ(errc_of_parse(R"({"sed": 1})"), dd::Errc::BadConfig);
  EXPECT_EQ(errc_of_parse(R"({"train": {"epoch": 1}})"), dd::Errc::BadConfig);
  EXPECT_EQ(errc_of_parse(R"({"inputs": [{"path": "a", "colour": "x"}]})"), dd::Errc::BadConfig);
  EXPECT_EQ(errc_of_parse(R"({"backtest": {"macd": {"fast": 3, "slower": 4}}})"), dd::Errc::BadConfig);
  EXPECT_EQ(errc_of_parse(R"({"train": {"epochs": "many"}})"), dd::Errc::BadConfig);
  EXPECT_EQ(errc_of_parse(R"({"schema_version": 99})"), dd::Errc::VersionMismatch);
  EXPECT_EQ(errc_of_parse("{not json"), dd::Errc::BadConfig);
}

TEST(Config, ValidateCatchesBadValues) {
  auto c = dd::config_from_json(R"({"inputs": [{"path": "a.csv"}]})");
  c.validate();
  auto bad = c;
  bad.inputs.clear();
  EXPECT_THROW(bad.validate(), dd::Error);
  bad = c;
  bad.sde_kinds = {dd::SdeKind::VE, dd::SdeKind::VE};
  EXPECT_THROW(bad.validate(), dd::Error);
  bad = c;
  bad.backtest_points = 10;
  EXPECT_THROW(bad.validate(), dd::Error);
  bad = c;
  bad.denoise.t_prime = 0.0;
  EXPECT_THROW(bad.validate(), dd::Error);
}

TEST(WindowFile, RoundTripIsBitExact) {
  dd::Rng rng(5);
  dd::WindowFile f;
  f.meta["family"] = "EMA";
  f.meta["note"] = "x=y";
  f.train.length = f.test.length = 6;
  f.train.stride = f.test.stride = 2;
  f.test.split = dd::Split::Test;
  for (int i = 0; i < 7; ++i) {
    dd::Window w;
    w.values.resize(6);
    rng.fill_gaussian(w.values);
    w.values[0] = 1.0 / 3.0;
    w.source_ticker = i % 2 ? "AAA" : "B";
    w.origin_index = static_cast<std::size_t>(i) * 2;
    w.norm = {rng.uniform(50, 150), rng.uniform(0.1, 3.0), i == 3};
    w.end_timestamp = 1700000000 + i;
    w.role = i % 3 ? dd::WindowRole::Sample : dd::WindowRole::Continuation;
    (i < 5 ? f.train : f.test).windows.push_back(w);
  }
  const auto text = dd::serialize_windows(f);
  const auto back = dd::parse_windows(text);
  EXPECT_EQ(back.meta, f.meta);
  EXPECT_EQ(back.train.length, 6u);
  EXPECT_EQ(back.test.split, dd::Split::Test);
  ASSERT_EQ(back.train.windows.size(), 5u);
  ASSERT_EQ(back.test.windows.size(), 2u);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& a = f.train.windows[i];
    const auto& b = back.train.windows[i];
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.source_ticker, b.source_ticker);
    EXPECT_EQ(a.origin_index, b.origin_index);
    EXPECT_EQ(a.norm.shift, b.norm.shift);
    EXPECT_EQ(a.norm.scale, b.norm.scale);
    EXPECT_EQ(a.norm.degenerate, b.norm.degenerate);
    EXPECT_EQ(a.end_timestamp, b.end_timestamp);
    EXPECT_EQ(a.role, b.role);
  }
  EXPECT_EQ(dd::serialize_windows(back), text);
}

TEST(WindowFile, RejectsForeignOrBrokenFiles) {
  EXPECT_THROW(dd::parse_windows("timestamp,close\n1,2\n"), dd::Error);
  EXPECT_THROW(dd::parse_windows("# format=diffden-windows\n# version=7\n# length=2\n# stride=1\n"), dd::Error);
  const std::string head =
      "# format=diffden-windows\n# version=1\n# length=2\n# stride=1\n"
      "ticker,split,role,origin_index,end_timestamp,shift,scale,degenerate,v0,v1\n";
  EXPECT_NO_THROW(dd::parse_windows(head + "A,train,sample,0,5,1,1,0,0.5,-0.5\n"));
  EXPECT_THROW(dd::parse_windows(head + "A,train,sample,0,5,1,1,0,0.5\n"), dd::Error);
  EXPECT_THROW(dd::parse_windows(head + "A,valid,sample,0,5,1,1,0,0.5,1\n"), dd::Error);
}
