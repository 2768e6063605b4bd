#include "diffden/denoiser.hpp"

#include <cmath>
#include <string>

#include "diffden/error.hpp"

namespace diffden {

std::size_t DenoiseConfig::steps(const SdeSpec& spec) const {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.n_steps) * t_prime / spec.horizon));
}

void DenoiseConfig::validate(const SdeSpec& spec) const {
  if (!(t_prime > 0.0 && t_prime <= spec.horizon))
    throw Error(Errc::BadParams, "t_prime must lie in (0, T]");
  if (steps(spec) < 1) throw Error(Errc::BadParams, "round(N * t_prime) must be >= 1");
  if (!(eta_tv >= 0.0) || !(eta_f >= 0.0)) throw Error(Errc::BadParams, "eta_* must be >= 0");
  if (!(fourier_threshold >= 0.0)) throw Error(Errc::BadParams, "fourier_threshold must be >= 0");
  if (n_seeds < 1) throw Error(Errc::BadParams, "n_seeds must be >= 1");
  if (!(corrector_snr >= 0.0)) throw Error(Errc::BadParams, "corrector_snr must be >= 0");
  if (!std::isfinite(omega)) throw Error(Errc::BadParams, "omega must be finite");
}

double tv_loss(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += std::abs(x[i] - x[i - 1]);
  return s;
}

std::vector<double> tv_grad(std::span<const double> x) {
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double s = sign(x[i] - x[i - 1]);
    g[i] += s;
    g[i - 1] -= s;
  }
  return g;
}

void predictor_update(const SdeSpec& spec, std::size_t i, std::span<double> x,
                      std::span<const double> score, std::span<const double> z) {
  if (i < 1 || i > spec.n_steps) throw Error(Errc::IndexOutOfRange, "predictor index outside [1, N]");
  if (score.size() != x.size() || z.size() != x.size())
    throw Error(Errc::LengthMismatch, "predictor inputs differ in length");
  if (spec.kind == SdeKind::VE) {
    const double hi = discrete_sigma(spec, i), lo = discrete_sigma(spec, i - 1);
    const double d = hi * hi - lo * lo;
    const double sd = std::sqrt(d);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += d * score[j] + sd * z[j];
    return;
  }
  const double b = discrete_beta(spec, i);
  const double inv = 1.0 / std::sqrt(1.0 - b);
  const double sb = std::sqrt(b);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] + b * score[j]) * inv + sb * z[j];
}

bool corrector_update(std::span<double> x, std::span<const double> score,
                      std::span<const double> z, double snr) {
  if (score.size() != x.size() || z.size() != x.size())
    throw Error(Errc::LengthMismatch, "corrector inputs differ in length");
  double ss = 0.0, zz = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    ss += score[j] * score[j];
    zz += z[j] * z[j];
  }
  if (!(ss > 0.0)) return false;
  const double ratio = snr * std::sqrt(zz) / std::sqrt(ss);
  const double eps = 2.0 * ratio * ratio;
  const double noise = std::sqrt(2.0 * eps);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += eps * score[j] + noise * z[j];
  return true;
}

std::vector<double> predictor_step(const SdeSpec& spec, const ScoreModel& model,
                                   std::span<const double> x, std::size_t i,
                                   std::span<const double> c, double omega, Rng& rng) {
  if (i < 1 || i > spec.n_steps) throw Error(Errc::IndexOutOfRange, "predictor index outside [1, N]");
  const double t = static_cast<double>(i) / static_cast<double>(spec.n_steps) * spec.horizon;
  const auto score = cf_guided_score(model, x, t, c, omega);
  std::vector<double> z(x.size());
  rng.fill_gaussian(z);
  std::vector<double> out(x.begin(), x.end());
  predictor_update(spec, i, out, score, z);
  return out;
}

CorrectorOutcome corrector_step(const ScoreModel& model, std::span<const double> x, double t,
                                std::span<const double> c, double omega, double snr, Rng& rng) {
  if (!(t > 0.0 && t <= model.sde().horizon))
    throw Error(Errc::OutOfRangeT, "corrector time outside (0, T]");
  const auto score = cf_guided_score(model, x, t, c, omega);
  std::vector<double> z(x.size());
  rng.fill_gaussian(z);
  CorrectorOutcome out{std::vector<double>(x.begin(), x.end()), false};
  out.skipped = !corrector_update(out.x, score, z, snr);
  return out;
}

std::vector<DenoiseResult> denoise_with_score(const BatchScoreFn& score, const SdeSpec& spec,
                                              std::span<const double> x0, std::size_t length,
                                              const DenoiseConfig& cfg,
                                              std::span<const std::uint64_t> stream_ids) {
  cfg.validate(spec);
  if (length < 2 || x0.size() % length != 0)
    throw Error(Errc::LengthMismatch, "input is not a whole number of length-L rows");
  const std::size_t rows = x0.size() / length;
  if (stream_ids.size() != rows) throw Error(Errc::LengthMismatch, "one stream id per row");
  const std::size_t K = cfg.steps(spec);
  const std::size_t L = length;
  const double n = static_cast<double>(spec.n_steps);

  // The Fourier target depends only on the condition, so it is fixed per row.
  std::vector<double> target;
  if (cfg.eta_f > 0.0) {
    target.resize(rows * L);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto y = fourier_target(x0.subspan(r * L, L), cfg.fourier_threshold);
      std::copy(y.begin(), y.end(), target.begin() + static_cast<std::ptrdiff_t>(r * L));
    }
  }

  std::vector<DenoiseResult> results(rows);
  for (auto& res : results) {
    res.denoised.assign(L, 0.0);
    res.config = cfg;
  }

  const double t_start = static_cast<double>(K) / n * spec.horizon;
  const KernelParams kp = kernel_params(spec, t_start);
  std::vector<double> x(rows * L), s(rows * L), z(rows * L);

  for (std::size_t seed = 0; seed < cfg.n_seeds; ++seed) {
    std::vector<Rng> rngs;
    rngs.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) rngs.emplace_back(cfg.base_seed + seed, stream_ids[r]);

    auto draw = [&] {
      for (std::size_t r = 0; r < rows; ++r)
        rngs[r].fill_gaussian(std::span<double>(z).subspan(r * L, L));
    };

    draw();
    for (std::size_t j = 0; j < rows * L; ++j) x[j] = kp.mean_coeff * x0[j] + kp.std * z[j];

    for (std::size_t k = K; k >= 1; --k) {
      const double t = static_cast<double>(k) / n * spec.horizon;
      score(x, t, s);
      draw();
      predictor_update(spec, k, x, s, z);
      for (std::size_t m = 0; m < cfg.corrector_steps; ++m) {
        score(x, t, s);
        draw();
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t o = r * L;
          const bool ok = corrector_update(std::span<double>(x).subspan(o, L),
                                           std::span<const double>(s).subspan(o, L),
                                           std::span<const double>(z).subspan(o, L),
                                           cfg.corrector_snr);
          if (!ok) ++results[r].skipped_corrector_steps;
        }
      }
      for (std::size_t r = 0; r < rows; ++r) {
        std::span<double> row = std::span<double>(x).subspan(r * L, L);
        if (cfg.eta_tv > 0.0) {
          const auto g = tv_grad(row);
          for (std::size_t j = 0; j < L; ++j) row[j] -= cfg.eta_tv * g[j];
        }
        if (cfg.eta_f > 0.0) {
          for (std::size_t j = 0; j < L; ++j)
            row[j] -= cfg.eta_f * 2.0 * (row[j] - target[r * L + j]);
        }
        for (double v : row)
          if (!std::isfinite(v))
            throw Error(Errc::NonFiniteState, "non-finite state at step " + std::to_string(k) +
                                                  ", seed " + std::to_string(seed) + ", row " +
                                                  std::to_string(r));
      }
    }

    for (std::size_t r = 0; r < rows; ++r) {
      results[r].per_seed.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(r * L),
                                       x.begin() + static_cast<std::ptrdiff_t>((r + 1) * L));
    }
  }

  // Fixed seed order keeps the reduction deterministic.
  const double inv = 1.0 / static_cast<double>(cfg.n_seeds);
  for (auto& res : results) {
    for (const auto& v : res.per_seed)
      for (std::size_t j = 0; j < L; ++j) res.denoised[j] += v[j];
    for (double& v : res.denoised) v *= inv;
  }
  return results;
}

std::vector<DenoiseResult> denoise_batch(const ScoreModel& model, std::span<const double> x0,
                                         const DenoiseConfig& cfg,
                                         std::span<const std::uint64_t> stream_ids) {
  const double omega = cfg.omega;
  auto score = [&](std::span<const double> x, double t, std::span<double> out) {
    cf_guided_score_batch(model, x, t, x0, omega, out);
  };
  return denoise_with_score(score, model.sde(), x0, model.length(), cfg, stream_ids);
}

DenoiseResult denoise(std::span<const double> x0, const ScoreModel& model,
                      const DenoiseConfig& cfg) {
  if (x0.size() != model.length()) throw Error(Errc::ShapeMismatch, "x0 length differs from L");
  const std::uint64_t stream[1] = {0};
  return std::move(denoise_batch(model, x0, cfg, stream).front());
}

}  // namespace diffden
