#pragma once

// Noising-denoising inference: perturb x0 to level T', then run the guided
// reverse chain back to zero with a predictor, M Langevin corrector steps, and
// TV / Fourier gradient steps per iteration. s independent chains are averaged.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diffden/rng.hpp"
#include "diffden/score_model.hpp"
#include "diffden/sde.hpp"

namespace diffden {

struct DenoiseConfig {
  double t_prime = 0.4;
  std::size_t corrector_steps = 1;  // M
  double omega = 1.0;
  double eta_tv = 0.1;
  double eta_f = 0.1;
  double fourier_threshold = 0.1;  // f, on |X_k| / L
  std::size_t n_seeds = 5;
  double corrector_snr = 0.16;
  std::uint64_t base_seed = 0;

  /// K = round(N * T' / T).
  std::size_t steps(const SdeSpec& spec) const;
  void validate(const SdeSpec& spec) const;
  bool operator==(const DenoiseConfig&) const = default;
};

struct DenoiseResult {
  std::vector<double> denoised;
  std::vector<std::vector<double>> per_seed;
  DenoiseConfig config;
  std::size_t skipped_corrector_steps = 0;  // zero-score skips across all seeds
};

// ---- guidance losses ------------------------------------------------------

/// sum_i |x[i+1] - x[i]|
double tv_loss(std::span<const double> x);
/// Subgradient with sign(0) = 0.
std::vector<double> tv_grad(std::span<const double> x);

/// Unnormalized forward DFT, X_k = sum_n x_n exp(-2 pi i k n / L).
std::vector<std::complex<double>> fft(std::span<const double> x);
/// Inverse of fft (includes the 1/L factor); returns the real part.
std::vector<double> ifft_real(std::span<const std::complex<double>> spectrum);

/// fft(x) with every non-DC bin whose |X_k| / L < f set to zero. Conjugate
/// bins share the decision made on the lower half so the result stays
/// Hermitian.
std::vector<std::complex<double>> fourier_filter(std::span<const double> x, double f);

/// Real series whose spectrum is fourier_filter(c, f).
std::vector<double> fourier_target(std::span<const double> c, double f);

/// ||U x - U Filter(c)||^2 with the unitary DFT U = fft / sqrt(L). By
/// Parseval this equals ||x - fourier_target(c, f)||^2.
double fourier_loss(std::span<const double> x, std::span<const double> c, double f);
/// 2 (x - fourier_target(c, f)).
std::vector<double> fourier_grad(std::span<const double> x, std::span<const double> c, double f);

// ---- reverse-chain steps --------------------------------------------------

/// Discrete reverse step from index i to i - 1 given a score estimate and a
/// standard normal draw z, in place on x (any number of stacked rows).
///   VE: x += (s_i^2 - s_{i-1}^2) score + sqrt(s_i^2 - s_{i-1}^2) z
///   VP: x  = (x + b_i score) / sqrt(1 - b_i) + sqrt(b_i) z
void predictor_update(const SdeSpec& spec, std::size_t i, std::span<double> x,
                      std::span<const double> score, std::span<const double> z);

/// Langevin update x += eps score + sqrt(2 eps) z, eps = 2 (snr |z| / |score|)^2.
/// Returns false and leaves x unchanged when the score is numerically zero.
bool corrector_update(std::span<double> x, std::span<const double> score,
                      std::span<const double> z, double snr);

/// Model-driven single-row predictor step at index i (time i / N).
std::vector<double> predictor_step(const SdeSpec& spec, const ScoreModel& model,
                                   std::span<const double> x, std::size_t i,
                                   std::span<const double> c, double omega, Rng& rng);

struct CorrectorOutcome {
  std::vector<double> x;
  bool skipped = false;
};

CorrectorOutcome corrector_step(const ScoreModel& model, std::span<const double> x, double t,
                                std::span<const double> c, double omega, double snr, Rng& rng);

// ---- full procedure -------------------------------------------------------

/// Score for stacked rows (rows x L) at a shared time. Row r of the output must
/// depend only on row r of the input.
using BatchScoreFn =
    std::function<void(std::span<const double> x, double t, std::span<double> out)>;

/// Denoises rows of `x0` (rows x L) with an arbitrary score function. Row r
/// seed j draws from Rng(base_seed + j, stream_ids[r]), so a row gives the same
/// result alone or inside any batch when its stream id is kept.
std::vector<DenoiseResult> denoise_with_score(const BatchScoreFn& score, const SdeSpec& spec,
                                              std::span<const double> x0, std::size_t length,
                                              const DenoiseConfig& cfg,
                                              std::span<const std::uint64_t> stream_ids);

/// Batched denoising with the guided model score and condition c = x0.
std::vector<DenoiseResult> denoise_batch(const ScoreModel& model, std::span<const double> x0,
                                         const DenoiseConfig& cfg,
                                         std::span<const std::uint64_t> stream_ids);

/// Single window, stream id 0.
DenoiseResult denoise(std::span<const double> x0, const ScoreModel& model,
                      const DenoiseConfig& cfg);

}  // namespace diffden
