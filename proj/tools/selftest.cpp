#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "diffden/backtest.hpp"
#include "diffden/config.hpp"
#include "diffden/data_ingest.hpp"
#include "diffden/denoiser.hpp"
#include "diffden/evaluation.hpp"
#include "diffden/kernels.hpp"
#include "diffden/rng.hpp"
#include "diffden/score_model.hpp"
#include "diffden/sde.hpp"

namespace dd = diffden;

namespace diffden_selftest {
namespace {

bool kernels_agree() {
  const auto* avx = dd::kernels::avx2_table();
  if (!avx) return true;
  const auto& sc = dd::kernels::scalar_table();
  dd::Rng rng(7);
  const std::size_t m = 5, n = 7, k = 13;
  std::vector<double> a(m * k), w(n * k), bias(n), c1(m * n), c2(m * n);
  rng.fill_gaussian(a);
  rng.fill_gaussian(w);
  rng.fill_gaussian(bias);
  sc.gemm_nt(a.data(), w.data(), bias.data(), c1.data(), m, n, k);
  avx->gemm_nt(a.data(), w.data(), bias.data(), c2.data(), m, n, k);
  for (std::size_t i = 0; i < c1.size(); ++i)
    if (std::abs(c1[i] - c2[i]) > 1e-12 * (1.0 + std::abs(c1[i]))) return false;
  return std::abs(sc.dot(a.data(), w.data(), k) - avx->dot(a.data(), w.data(), k)) < 1e-12;
}

bool fft_round_trip() {
  dd::Rng rng(3);
  std::vector<double> x(60);
  rng.fill_gaussian(x);
  const auto back = dd::ifft_real(dd::fft(x));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(back[i] - x[i]) > 1e-12) return false;
  return true;
}

bool metric_examples() {
  const double f1 = dd::f1_score({8, 2, 0, 4});
  const double m = dd::mcc({6, 2, 5, 3});
  return std::abs(f1 - 8.0 / 11.0) < 1e-15 && std::abs(m - 24.0 / std::sqrt(4032.0)) < 1e-15;
}

bool zigzag_dc() {
  const std::vector<double> p{100.0, 102.0, 99.96, 101.9592};
  const auto r = dd::dc_events(p, 0.01);
  return r.event_count == 3;
}

bool kernel_moments() {
  for (auto spec : {dd::SdeSpec::ve(), dd::SdeSpec::vp()}) {
    dd::Rng rng(11);
    const std::vector<double> x0{1.0};
    const auto kp = dd::kernel_params(spec, 0.5);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = dd::perturb(spec, x0, 0.5, rng).xt[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    if (std::abs(mean - kp.mean_coeff) > 5.0 * kp.std / std::sqrt(n)) return false;
    if (std::abs(sd - kp.std) > 0.05 * kp.std) return false;
  }
  return true;
}

bool guidance_endpoints() {
  dd::ModelShape shape;
  shape.length = 8;
  shape.embed_dim = 8;
  shape.hidden = 16;
  shape.depth = 1;
  const dd::ScoreModel model(shape, dd::SdeSpec::ve(), 5);
  dd::Rng rng(9);
  std::vector<double> x(8), c(8);
  rng.fill_gaussian(x);
  rng.fill_gaussian(c);
  const auto cond = model.forward(x, 0.3, std::span<const double>(c));
  const auto unc = model.forward(x, 0.3, std::nullopt);
  return dd::cf_guided_score(model, x, 0.3, c, 1.0) == cond &&
         dd::cf_guided_score(model, x, 0.3, c, 0.0) == unc;
}

bool config_round_trip() {
  dd::RunConfig cfg;
  cfg.seed = 42;
  cfg.inputs.push_back({"prices.csv", {}});
  cfg.finalize();
  return dd::config_from_json(dd::config_to_json(cfg)) == cfg;
}

bool backtest_ledger() {
  const std::vector<double> p{100, 101, 103, 102, 104};
  dd::Signal s{dd::Action::Buy, dd::Action::Hold, dd::Action::Sell, dd::Action::Hold, dd::Action::Hold};
  const auto r = dd::run_signal_backtest(s, p, dd::TradeMode::LongOnly);
  return r.n_trades == 1 && std::abs(r.lor - std::log(102.0 / 101.0)) < 1e-15;
}

}  // namespace

bool run(std::ostream& out) {
  const std::vector<std::pair<std::string, std::function<bool()>>> checks{
      {"kernels scalar/avx2 agree", kernels_agree},
      {"fft round trip", fft_round_trip},
      {"f1 / mcc worked examples", metric_examples},
      {"zigzag dc events", zigzag_dc},
      {"perturbation kernel moments", kernel_moments},
      {"guidance endpoints", guidance_endpoints},
      {"config round trip", config_round_trip},
      {"backtest ledger", backtest_ledger},
  };
  bool ok = true;
  out << "kernels: " << dd::kernels::active().name << "\n";
  for (const auto& [name, fn] : checks) {
    bool pass = false;
    try {
      pass = fn();
    } catch (const std::exception& e) {
      out << "  error: " << e.what() << "\n";
    }
    out << (pass ? "ok   " : "FAIL ") << name << "\n";
    ok = ok && pass;
  }
  return ok;
}

}  // namespace diffden_selftest
