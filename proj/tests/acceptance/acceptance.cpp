// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed below; a criterion that misses them fails, and the binary exits 1.
//
// DIFFDEN_ACCEPT_ONLY=4,6 runs a subset; DIFFDEN_ACCEPT_VERBOSE=1 prints the
// measured values behind each verdict.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "diffden/backtest.hpp"
#include "diffden/classifier.hpp"
#include "diffden/config.hpp"
#include "diffden/data_ingest.hpp"
#include "diffden/denoiser.hpp"
#include "diffden/evaluation.hpp"
#include "diffden/pipeline.hpp"
#include "diffden/rng.hpp"
#include "diffden/score_model.hpp"
#include "diffden/sde.hpp"

namespace dd = diffden;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and budgets ---------------------------------------
constexpr int kC1Draws = 100000;
constexpr double kC1StdErrors = 4.0;
constexpr double kC1Budget = 10.0;

constexpr double kC2ParamRelTol = 1e-4;
constexpr double kC2InputRelTol = 1e-5;
constexpr double kC2Budget = 30.0;

constexpr double kC3CollinearTol = 1e-10;
constexpr double kC3Budget = 1.0;

constexpr std::size_t kC4Windows = 50;
constexpr double kC4NoiseStd = 0.3;
constexpr double kC4MseRatio = 0.5;
constexpr double kC4VarianceFactor = 2.0;  // "within x2" of 1/s
constexpr double kC4Budget = 300.0;

constexpr double kC5WinShare = 0.90;
constexpr double kC5Budget = 30.0;

constexpr std::size_t kC6MinWindows = 2000;
constexpr double kC6F1Gain = 0.05;
constexpr double kC6F1Spread = 0.05;
constexpr double kC6Budget = 600.0;

constexpr int kC7Matrices = 1000;
constexpr double kC7Tol = 1e-12;

constexpr double kC8Tol = 1e-12;
constexpr int kC8Truncations = 100;
constexpr double kC8Budget = 10.0;

constexpr double kC9Budget = 1200.0;

bool verbose() {
  const char* v = std::getenv("DIFFDEN_ACCEPT_VERBOSE");
  return v && std::string(v) != "0";
}

std::set<int> selected() {
  std::set<int> out;
  const char* v = std::getenv("DIFFDEN_ACCEPT_ONLY");
  if (!v) {
    for (int i = 1; i <= 9; ++i) out.insert(i);
    return out;
  }
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
  return out;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

std::vector<double> randn(std::size_t n, dd::Rng& rng) {
  std::vector<double> v(n);
  rng.fill_gaussian(v);
  return v;
}

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// ---- 1. perturbation kernel ------------------------------------------------
Outcome criterion1() {
  Outcome o{true, ""};
  double worst = 0.0;
  for (auto spec : {dd::SdeSpec::ve(), dd::SdeSpec::vp()}) {
    for (double t : {0.1, 0.5, 1.0}) {
      dd::Rng rng(1000 + static_cast<std::uint64_t>(t * 10) + (spec.kind == dd::SdeKind::VP ? 50 : 0));
      const std::vector<double> x0{1.3};
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < kC1Draws; ++i) {
        const double v = dd::perturb(spec, x0, t, rng).xt[0];
        sum += v;
        sq += v * v;
      }
      const auto k = dd::kernel_params(spec, t);
      const double n = kC1Draws;
      const double mean = sum / n;
      const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
      const double z_mean = std::abs(mean - k.mean_coeff * x0[0]) / (k.std / std::sqrt(n));
      const double z_sd = std::abs(sd - k.std) / (k.std / std::sqrt(2.0 * (n - 1)));
      worst = std::max({worst, z_mean, z_sd});
      if (z_mean > kC1StdErrors || z_sd > kC1StdErrors) o.pass = false;
    }
  }
  o.detail = "worst deviation " + fmt(worst, 3) + " SE";
  return o;
}

// ---- 2. gradient oracles ------------------------------------------------------
Outcome criterion2() {
  dd::Rng rng(2002);
  double worst_param = 0.0, worst_tv = 0.0, worst_f = 0.0;
  for (int inst = 0; inst < 4; ++inst) {
    dd::ModelShape shape;
    shape.length = 10 + static_cast<std::size_t>(inst) * 3;
    shape.embed_dim = 6;
    shape.hidden = 12;
    shape.depth = static_cast<std::size_t>(inst % 3);
    dd::ScoreModel m(shape, inst % 2 ? dd::SdeSpec::vp() : dd::SdeSpec::ve(), 40 + static_cast<std::uint64_t>(inst));
    // Perturb the initial weights so the check does not run at a special point.
    for (double& p : m.parameters()) p += 0.05 * rng.gaussian();
    dd::DsmBatch b;
    b.rows = 5;
    b.x0 = randn(b.rows * shape.length, rng);
    b.z = randn(b.rows * shape.length, rng);
    for (std::size_t r = 0; r < b.rows; ++r) {
      b.t.push_back(rng.uniform(0.05, 1.0));
      b.use_cond.push_back(r % 2 ? 1 : 0);
    }
    std::vector<double> grad(m.parameters().size());
    dd::dsm_loss(m, b, grad);
    const double h = 1e-5;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      double& p = m.parameters()[i];
      const double keep = p;
      p = keep + h;
      const double up = dd::dsm_loss(m, b);
      p = keep - h;
      const double dn = dd::dsm_loss(m, b);
      p = keep;
      const double fd = (up - dn) / (2 * h);
      worst_param = std::max(worst_param, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
    }

    const auto x = randn(shape.length, rng), c = randn(shape.length, rng);
    const auto gtv = dd::tv_grad(x);
    const double f = 0.1 + 0.05 * inst;
    const auto gf = dd::fourier_grad(x, c, f);
    const double hx = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto up = x, dn = x;
      up[i] += hx;
      dn[i] -= hx;
      const double fd_tv = (dd::tv_loss(up) - dd::tv_loss(dn)) / (2 * hx);
      const double fd_f = (dd::fourier_loss(up, c, f) - dd::fourier_loss(dn, c, f)) / (2 * hx);
      // TV subgradient entries are integers in [-2, 2]; 1 is their scale.
      worst_tv = std::max(worst_tv, std::abs(fd_tv - gtv[i]) / std::max(std::abs(gtv[i]), 1.0));
      worst_f = std::max(worst_f, std::abs(fd_f - gf[i]) / std::max({std::abs(fd_f), std::abs(gf[i]), 1e-3}));
    }
  }
  Outcome o;
  o.pass = worst_param < kC2ParamRelTol && worst_tv < kC2InputRelTol && worst_f < kC2InputRelTol;
  o.detail = "param " + fmt(worst_param, 3) + ", tv " + fmt(worst_tv, 3) + ", fourier " + fmt(worst_f, 3);
  return o;
}

// ---- 3. guidance algebra ------------------------------------------------------
Outcome criterion3() {
  dd::Rng rng(3003);
  bool bitwise = true;
  double worst = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    dd::ModelShape shape;
    shape.length = 24;
    shape.embed_dim = 8;
    shape.hidden = 32;
    shape.depth = 2;
    const dd::ScoreModel m(shape, inst % 2 ? dd::SdeSpec::vp() : dd::SdeSpec::ve(), 60 + static_cast<std::uint64_t>(inst));
    const auto x = randn(shape.length, rng), c = randn(shape.length, rng);
    const double t = rng.uniform(0.01, 1.0);
    const auto cond = m.forward(x, t, std::span<const double>(c));
    const auto unc = m.forward(x, t, std::nullopt);
    bitwise = bitwise && dd::cf_guided_score(m, x, t, c, 1.0) == cond && dd::cf_guided_score(m, x, t, c, 0.0) == unc;
    // Collinearity: g(w) - g(0) must be w * (g(1) - g(0)).
    double scale = 0.0;
    for (std::size_t j = 0; j < shape.length; ++j) scale = std::max(scale, std::abs(cond[j] - unc[j]));
    for (double w : {-1.0, 0.25, 0.5, 2.0, 3.0, 7.5}) {
      const auto g = dd::cf_guided_score(m, x, t, c, w);
      for (std::size_t j = 0; j < shape.length; ++j) {
        const double resid = (g[j] - unc[j]) - w * (cond[j] - unc[j]);
        worst = std::max(worst, std::abs(resid) / std::max(1.0, std::abs(w) * scale));
      }
    }
  }
  Outcome o;
  o.pass = bitwise && worst < kC3CollinearTol;
  o.detail = std::string(bitwise ? "endpoints bitwise" : "endpoints DIFFER") + ", collinearity residual " + fmt(worst, 3);
  return o;
}

// ---- shared sine setup for 4 and 5 -------------------------------------------
constexpr std::size_t kSineL = 60;

struct SineSetup {
  dd::WindowSet train;                       // noisy training windows
  std::vector<std::vector<double>> clean;    // test windows, price space
  std::vector<std::vector<double>> noisy;    // test windows, price space
  std::vector<double> noisy_norm;            // test windows normalized, rows x L
  std::vector<dd::NormParams> norms;
};

dd::SyntheticParams sine_params(std::size_t length, double noise) {
  dd::SyntheticParams p;
  p.length = length;
  p.amplitude = 0.05;
  p.period = kSineL;
  p.cycles = 1.0;
  p.noise_std = noise;
  return p;
}

SineSetup make_sine_setup() {
  SineSetup s;
  // Training windows from a long noisy series.
  const auto train_series = dd::generate_synthetic(dd::SyntheticKind::Sine, sine_params(4000, kC4NoiseStd), 401);
  s.train = dd::rolling_windows(train_series, kSineL, 2);
  // Test windows: a fresh noisy series and its noise-free twin.
  const std::size_t n = kSineL + 7 * (kC4Windows - 1);
  const auto clean = dd::generate_synthetic(dd::SyntheticKind::Sine, sine_params(n, 0.0), 402);
  const auto noisy = dd::generate_synthetic(dd::SyntheticKind::Sine, sine_params(n, kC4NoiseStd), 403);
  for (std::size_t w = 0; w < kC4Windows; ++w) {
    const std::size_t o = 7 * w;
    s.clean.emplace_back(clean.closes.begin() + static_cast<std::ptrdiff_t>(o),
                         clean.closes.begin() + static_cast<std::ptrdiff_t>(o + kSineL));
    s.noisy.emplace_back(noisy.closes.begin() + static_cast<std::ptrdiff_t>(o),
                         noisy.closes.begin() + static_cast<std::ptrdiff_t>(o + kSineL));
    const auto [z, norm] = dd::normalize(s.noisy.back());
    s.noisy_norm.insert(s.noisy_norm.end(), z.begin(), z.end());
    s.norms.push_back(norm);
  }
  return s;
}

dd::ModelShape sine_shape() {
  dd::ModelShape shape;
  shape.length = kSineL;
  shape.embed_dim = 16;
  shape.hidden = 64;
  shape.depth = 2;
  return shape;
}

dd::SdeSpec sine_spec(dd::SdeKind kind) {
  dd::SdeSpec spec = kind == dd::SdeKind::VE ? dd::SdeSpec::ve() : dd::SdeSpec::vp();
  spec.n_steps = 100;
  return spec;
}

dd::TrainConfig sine_train() {
  dd::TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 64;
  tc.learning_rate = 2e-3;
  tc.seed = 404;
  return tc;
}

dd::DenoiseConfig sine_denoise() {
  dd::DenoiseConfig cfg;
  cfg.t_prime = 0.4;
  cfg.corrector_steps = 1;
  cfg.omega = 1.0;
  cfg.eta_tv = 0.1;
  cfg.eta_f = 0.1;
  cfg.fourier_threshold = 0.1;
  cfg.n_seeds = 5;
  cfg.base_seed = 405;
  return cfg;
}

struct SineModels {
  SineSetup setup;
  std::vector<std::pair<dd::SdeKind, dd::ScoreModel>> models;
  // Denoised test windows in price space, per model.
  std::vector<std::vector<std::vector<double>>> denoised;
};

SineModels& sine_models() {
  static SineModels* cache = [] {
    auto* sm = new SineModels{make_sine_setup(), {}, {}};
    for (auto kind : {dd::SdeKind::VE, dd::SdeKind::VP}) {
      auto res = dd::train_dsm(sm->setup.train, sine_spec(kind), sine_shape(), sine_train());
      if (verbose())
        std::cerr << "  [sine] " << dd::sde_kind_name(kind) << " loss " << res.loss_curve.front() << " -> "
                  << res.loss_curve.back() << "\n";
      sm->models.emplace_back(kind, std::move(res.model));
    }
    std::vector<std::uint64_t> streams(kC4Windows);
    std::iota(streams.begin(), streams.end(), 0);
    for (const auto& [kind, model] : sm->models) {
      const auto out = dd::denoise_batch(model, sm->setup.noisy_norm, sine_denoise(), streams);
      std::vector<std::vector<double>> prices;
      for (std::size_t w = 0; w < kC4Windows; ++w) prices.push_back(dd::denormalize(out[w].denoised, sm->setup.norms[w]));
      sm->denoised.push_back(std::move(prices));
    }
    return sm;
  }();
  return *cache;
}

// Variance of the seed-averaged output across independent replicate chains.
double seed_average_variance(const dd::ScoreModel& model, std::span<const double> x0, std::size_t s) {
  constexpr std::size_t kReplicates = 40;
  const std::size_t L = x0.size();
  std::vector<double> rows;
  for (std::size_t r = 0; r < kReplicates; ++r) rows.insert(rows.end(), x0.begin(), x0.end());
  std::vector<std::uint64_t> streams(kReplicates);
  std::iota(streams.begin(), streams.end(), 1000);
  auto cfg = sine_denoise();
  cfg.n_seeds = s;
  const auto out = dd::denoise_batch(model, rows, cfg, streams);
  double total = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    double mean = 0.0;
    for (const auto& o : out) mean += o.denoised[j];
    mean /= kReplicates;
    double var = 0.0;
    for (const auto& o : out) var += (o.denoised[j] - mean) * (o.denoised[j] - mean);
    total += var / (kReplicates - 1);
  }
  return total / static_cast<double>(L);
}

// ---- 4. denoising recovery ------------------------------------------------------
Outcome criterion4() {
  auto& sm = sine_models();
  Outcome o{true, ""};
  double noisy_mse = 0.0;
  for (std::size_t w = 0; w < kC4Windows; ++w) noisy_mse += mse(sm.setup.noisy[w], sm.setup.clean[w]);
  for (std::size_t m = 0; m < sm.models.size(); ++m) {
    double den_mse = 0.0;
    for (std::size_t w = 0; w < kC4Windows; ++w) den_mse += mse(sm.denoised[m][w], sm.setup.clean[w]);
    const double ratio = den_mse / noisy_mse;
    if (!(ratio <= kC4MseRatio)) o.pass = false;
    const auto& model = sm.models[m].second;
    const std::span<const double> x0(sm.setup.noisy_norm.data(), kSineL);
    const double v1 = seed_average_variance(model, x0, 1);
    const double v4 = seed_average_variance(model, x0, 4);
    const double v16 = seed_average_variance(model, x0, 16);
    const double r4 = v1 / v4, r16 = v1 / v16;
    const bool var_ok = r4 >= 4.0 / kC4VarianceFactor && r4 <= 4.0 * kC4VarianceFactor &&
                        r16 >= 16.0 / kC4VarianceFactor && r16 <= 16.0 * kC4VarianceFactor;
    if (!var_ok) o.pass = false;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + std::string(dd::sde_kind_name(sm.models[m].first)) +
                " mse ratio " + fmt(ratio, 3) + ", var ratios s4 " + fmt(r4, 3) + " s16 " + fmt(r16, 3);
  }
  return o;
}

// ---- 5. DC events drop after denoising ------------------------------------------
Outcome criterion5() {
  auto& sm = sine_models();
  const std::vector<double> thresholds{0.005, 0.01, 0.02};
  Outcome o{true, ""};
  for (std::size_t m = 0; m < sm.models.size(); ++m) {
    std::size_t wins = 0, total = 0;
    for (std::size_t w = 0; w < kC4Windows; ++w)
      for (double th : thresholds) {
        const auto den = dd::dc_events(sm.denoised[m][w], th).event_count;
        const auto ori = dd::dc_events(sm.setup.noisy[w], th).event_count;
        wins += den < ori;
        ++total;
      }
    const double share = static_cast<double>(wins) / static_cast<double>(total);
    if (!(share >= kC5WinShare)) o.pass = false;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + std::string(dd::sde_kind_name(sm.models[m].first)) +
                " fewer events in " + fmt(100.0 * share, 4) + "% of " + std::to_string(total);
  }
  return o;
}

// ---- 6. classification gain on TrendPlusAR1 -------------------------------------
struct Ar1Data {
  dd::WindowFile ori;
  dd::WindowFile ema;
  std::size_t windows = 0;
};

Ar1Data make_ar1_data() {
  Ar1Data d;
  dd::IngestOptions opt;
  opt.length = 60;
  opt.stride = 3;
  opt.train_fraction = 0.8;
  opt.horizons = {1};
  d.ori.train.length = d.ori.test.length = opt.length;
  d.ori.test.split = dd::Split::Test;
  d.ema = d.ori;
  for (std::uint64_t k = 0; k < 8; ++k) {
    dd::SyntheticParams p;
    p.length = 5200;
    p.drift = (k % 2 ? 1.0 : -1.0) * 1e-4;
    p.ar_coeff = 0.98;
    p.ar_sigma = 0.01;
    p.ticker = "AR" + std::to_string(k);
    const auto s = dd::generate_synthetic(dd::SyntheticKind::TrendPlusAR1, p, 600 + k);
    const auto a = dd::ingest_series(s, opt);
    const auto e = dd::ingest_series(dd::ema_series(s, 0.5), opt);
    auto append = [](dd::WindowFile& f, const dd::SplitWindows& sw) {
      f.train.windows.insert(f.train.windows.end(), sw.train.windows.begin(), sw.train.windows.end());
      f.test.windows.insert(f.test.windows.end(), sw.test.windows.begin(), sw.test.windows.end());
    };
    append(d.ori, a);
    append(d.ema, e);
  }
  d.windows = d.ori.train.sample_count() + d.ori.test.sample_count();
  return d;
}

double family_f1(const dd::WindowFile& f, const std::string& family, const std::vector<std::uint64_t>& seeds) {
  std::map<std::string, dd::FamilySplits> data;
  dd::FamilySplits fs;
  fs.train.emplace(1, dd::build_dataset(f.train, 1, family));
  fs.test.emplace(1, dd::build_dataset(f.test, 1, family));
  data[family] = std::move(fs);
  return dd::evaluate_protocol(data, seeds).at(family).at(1).f1_mean;
}

Outcome criterion6() {
  const Ar1Data d = make_ar1_data();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  dd::ModelShape shape;
  shape.length = 60;
  shape.embed_dim = 16;
  shape.hidden = 48;
  shape.depth = 1;
  // VE at these T' perturbs z-scored windows gently (sigma <= 0.63), so the
  // denoised endpoints that define the labels carry little sampler noise.
  dd::SdeSpec spec = dd::SdeSpec::ve();
  spec.n_steps = 50;
  dd::TrainConfig tc;
  tc.epochs = 20;
  tc.learning_rate = 2e-3;
  tc.seed = 606;
  const auto trained = dd::train_dsm(d.ema.train, spec, shape, tc);

  const double f1_ori = family_f1(d.ori, "Ori", seeds);
  std::vector<double> f1_den;
  for (int k = 1; k <= 9; ++k) {
    dd::DenoiseConfig cfg;
    cfg.t_prime = 0.1 * k;
    cfg.n_seeds = 4;
    cfg.base_seed = 607;
    const auto den = dd::denoise_windows(trained.model, d.ema, cfg, 512, 0);
    f1_den.push_back(family_f1(den, dd::family_name(spec.kind), seeds));
    if (verbose()) std::cerr << "  [ar1] T'=" << cfg.t_prime << " F1 " << f1_den.back() << "\n";
  }
  const double at_default = f1_den[3];  // T' = 0.4
  const auto [lo, hi] = std::minmax_element(f1_den.begin(), f1_den.end());
  const double spread = *hi - *lo;
  Outcome o;
  o.pass = d.windows >= kC6MinWindows && at_default - f1_ori >= kC6F1Gain && spread < kC6F1Spread;
  o.detail = std::to_string(d.windows) + " windows, F1 Ori " + fmt(f1_ori, 3) + ", denoised (T'=0.4) " +
             fmt(at_default, 3) + ", spread over T' " + fmt(spread, 3);
  return o;
}

// ---- 7. metric exactness -------------------------------------------------------
Outcome criterion7() {
  dd::Rng rng(7007);
  double worst = 0.0;
  for (int i = 0; i < kC7Matrices; ++i) {
    const dd::ConfusionMatrix cm{rng.next_u64() % 500 + 1, rng.next_u64() % 500, rng.next_u64() % 500,
                                 rng.next_u64() % 500};
    // Brute force over expanded label vectors.
    std::vector<int> y, p;
    auto push = [&](std::uint64_t n, int a, int b) {
      for (std::uint64_t k = 0; k < n; ++k) y.push_back(a), p.push_back(b);
    };
    push(cm.tp, 1, 1);
    push(cm.fp, 0, 1);
    push(cm.tn, 0, 0);
    push(cm.fn, 1, 0);
    long double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      tp += y[k] && p[k];
      fp += !y[k] && p[k];
      tn += !y[k] && !p[k];
      fn += y[k] && !p[k];
    }
    const long double prec = tp / (tp + fp), rec = tp / (tp + fn);
    const long double f1 = 2 * prec * rec / (prec + rec);
    const long double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    const long double m = den == 0 ? 0 : (tp * tn - fp * fn) / den;
    const auto got = dd::confusion_from_predictions(y, p);
    worst = std::max({worst, std::abs(static_cast<double>(f1) - dd::f1_score(got)),
                      std::abs(static_cast<double>(m) - dd::mcc(got))});
  }
  const double f1_example = dd::f1_score({8, 2, 0, 4});
  const double mcc_example = dd::mcc({6, 2, 5, 3});
  const auto dc = dd::dc_events(std::vector<double>{100.0, 102.0, 99.96, 101.9592}, 0.01);
  const bool examples = std::abs(f1_example - 8.0 / 11.0) <= kC7Tol &&
                        std::abs(mcc_example - 24.0 / std::sqrt(4032.0)) <= kC7Tol && dc.event_count == 3 &&
                        dc.event_indices == std::vector<std::size_t>{1, 2, 3};
  Outcome o;
  o.pass = worst <= kC7Tol && examples;
  o.detail = "max deviation " + fmt(worst, 3) + ", F1 " + fmt(f1_example, 10) + ", MCC " + fmt(mcc_example, 10) +
             ", zigzag events " + std::to_string(dc.event_count);
  return o;
}

// ---- 8. backtest ledgers ------------------------------------------------------
Outcome criterion8() {
  using A = dd::Action;
  bool ok = true;
  std::string fail;
  auto check = [&](bool cond, const std::string& what) {
    if (!cond && ok) fail = what;
    ok = ok && cond;
  };
  {
    const std::vector<double> p{100, 101, 103, 102, 104, 99, 98};
    const dd::Signal s{A::Buy, A::Hold, A::Sell, A::Buy, A::Hold, A::Hold, A::Hold};
    const auto r = dd::run_signal_backtest(s, p, dd::TradeMode::LongOnly);
    const double lor = std::log(102.0 / 101.0) + std::log(98.0 / 104.0);
    check(r.n_trades == 2 && std::abs(r.lor - lor) <= kC8Tol && std::abs(r.lsr - lor) <= kC8Tol, "long-only ledger");
    const dd::Signal t{A::Sell, A::Hold, A::Buy, A::Hold, A::Sell, A::Hold, A::Buy};
    const auto q = dd::run_signal_backtest(t, p, dd::TradeMode::LongShort);
    const double l1 = std::log(99.0 / 102.0);
    const double lsr = -std::log(102.0 / 101.0) + l1 - std::log(98.0 / 99.0);
    check(q.n_trades == 3 && std::abs(q.lor - l1) <= kC8Tol && std::abs(q.lsr - lsr) <= kC8Tol, "long-short ledger");
  }
  {
    const std::vector<double> p{100, 100, 110, 110, 99};
    const auto r = dd::run_prediction_backtest(std::vector<int>{1, 0, 1}, std::vector<std::size_t>{0, 1, 2}, p, 1,
                                               dd::PredictionMode::Following);
    check(r.n_trades == 3 && std::abs(r.lsr - (std::log(1.1) + std::log(0.9))) <= kC8Tol &&
              std::abs(*r.lohr - 0.5) <= kC8Tol && std::abs(*r.lshr - 1.0 / 3.0) <= kC8Tol,
          "prediction ledger");
  }
  dd::Rng rng(8008);
  std::vector<double> p{100.0};
  while (p.size() < 800) p.push_back(p.back() * std::exp(0.01 * rng.gaussian()));
  for (int strat = 0; strat < 2; ++strat) {
    const auto full_sig = strat ? dd::bollinger_signals(p) : dd::macd_signals(p);
    const auto full = dd::run_signal_backtest(full_sig, p, dd::TradeMode::LongShort);
    for (int trial = 0; trial < kC8Truncations; ++trial) {
      const std::size_t cut = 80 + rng.next_u64() % (p.size() - 80);
      const std::span<const double> prefix(p.data(), cut);
      const auto sig = strat ? dd::bollinger_signals(prefix) : dd::macd_signals(prefix);
      for (std::size_t t = 0; t < cut; ++t) check(sig[t] == full_sig[t], "signal prefix stability");
      const auto part = dd::run_signal_backtest(sig, prefix, dd::TradeMode::LongShort);
      for (std::size_t i = 0; i < part.trades.size() && part.trades[i].exit_index < cut - 1; ++i)
        check(part.trades[i].entry_index == full.trades[i].entry_index &&
                  part.trades[i].exit_index == full.trades[i].exit_index &&
                  part.trades[i].log_return == full.trades[i].log_return,
              "trade prefix stability");
    }
  }
  for (std::size_t h : {1u, 5u, 10u}) {
    std::vector<int> pred;
    std::vector<std::size_t> at;
    for (std::size_t t = 0; t + 2 * h < p.size(); ++t) {
      if (p[t + 2 * h] == p[t + h]) continue;
      at.push_back(t);
      pred.push_back(p[t + 2 * h] > p[t + h] ? 1 : 0);
    }
    const auto r = dd::run_prediction_backtest(pred, at, p, h, dd::PredictionMode::Following);
    check(*r.lshr == 1.0 && *r.lohr == 1.0, "oracle LSHR");
  }
  Outcome o;
  o.pass = ok;
  o.detail = ok ? "hand ledgers, " + std::to_string(2 * kC8Truncations) + " truncations, oracle LSHR = 1" : "failed: " + fail;
  return o;
}

// ---- 9. end-to-end determinism ------------------------------------------------
Outcome criterion9() {
  const fs::path dir = fs::temp_directory_path() / ("diffden_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  dd::RunConfig cfg;
  cfg.seed = 99;
  for (std::uint64_t k = 0; k < 2; ++k) {
    dd::SyntheticParams p;
    p.length = 600;
    p.ar_coeff = 0.95;
    p.ar_sigma = 0.01;
    p.drift = 2e-4;
    p.ticker = "E" + std::to_string(k);
    const auto s = dd::generate_synthetic(dd::SyntheticKind::TrendPlusAR1, p, 900 + k);
    const fs::path path = dir / (p.ticker + ".csv");
    std::ofstream(path) << dd::to_csv(s);
    dd::InputSpec in;
    in.path = path.string();
    in.schema.ticker = p.ticker;
    cfg.inputs.push_back(in);
  }
  cfg.ingest.length = 30;
  cfg.ingest.stride = 5;
  cfg.sde.n_steps = 50;
  cfg.model.embed_dim = 8;
  cfg.model.hidden = 32;
  cfg.model.depth = 1;
  cfg.train.epochs = 3;
  cfg.denoise.n_seeds = 2;
  cfg.classifier.n_rounds = 30;
  cfg.classifier_seeds = 3;
  cfg.backtest_points = 100;

  cfg.output_dir = (dir / "run_a").string();
  cfg.finalize();
  const auto a = dd::pipeline_run(cfg);
  cfg.output_dir = (dir / "run_b").string();
  const auto b = dd::pipeline_run(cfg);
  // Deleting an artifact and re-running into the same directory must
  // reproduce it exactly.
  fs::remove(dir / "run_b" / "windows_ve.csv");
  const auto c = dd::pipeline_run(cfg);
  fs::remove_all(dir);

  Outcome o;
  o.pass = a.metrics_json == b.metrics_json && a.digests == b.digests && b.digests == c.digests &&
           b.metrics_json == c.metrics_json;
  o.detail = std::to_string(a.metrics_json.size()) + "-byte metrics, " + std::to_string(a.digests.size()) +
             " artifact digests " + (a.digests == b.digests ? "identical" : "DIFFER");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "perturbation kernel fidelity", kC1Budget, criterion1},
      {2, "gradient oracles", kC2Budget, criterion2},
      {3, "guidance algebra", kC3Budget, criterion3},
      {4, "denoising recovery", kC4Budget, criterion4},
      {5, "dc events fall after denoising", kC5Budget, criterion5},
      {6, "denoised F1 gain and T' insensitivity", kC6Budget, criterion6},
      {7, "metric exactness", 0.0, criterion7},
      {8, "backtest ledger exactness", kC8Budget, criterion8},
      {9, "end-to-end determinism", kC9Budget, criterion9},
  };
  const auto only = selected();
  bool all_pass = true;
  for (const auto& c : all) {
    if (!only.contains(c.id)) continue;
    Clock clock;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = clock.seconds();
    // Criteria 4 and 5 share the trained sine models; their setup time is
    // charged to whichever runs first.
    const bool in_budget = c.budget <= 0.0 || secs <= c.budget;
    const bool pass = o.pass && in_budget;
    all_pass = all_pass && pass;
    std::cout << (pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << " ("
              << fmt(secs, 3) << " s" << (in_budget ? "" : ", over budget " + fmt(c.budget, 4) + " s") << ")"
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
