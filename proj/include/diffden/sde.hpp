#pragma once

// Variance-exploding and variance-preserving forward diffusions: schedules,
// closed-form perturbation kernels, drift/diffusion coefficients and the
// discrete chains they converge from.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "diffden/rng.hpp"

namespace diffden {

enum class SdeKind { VE, VP };

std::string_view sde_kind_name(SdeKind k) noexcept;
SdeKind parse_sde_kind(std::string_view name);

/// Times are floored at this value wherever a positive kernel std is needed.
inline constexpr double kTimeEpsilon = 1e-5;

struct SdeSpec {
  SdeKind kind = SdeKind::VE;
  std::size_t n_steps = 1000;
  double horizon = 1.0;
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  double beta_min = 0.1;
  double beta_max = 20.0;

  static SdeSpec ve() { return SdeSpec{}; }
  static SdeSpec vp() {
    SdeSpec s;
    s.kind = SdeKind::VP;
    return s;
  }

  void validate() const;
  bool operator==(const SdeSpec&) const = default;
};

/// Perturbation kernel p_0t(x_t | x_0) = N(mean_coeff * x_0, std^2 I).
struct KernelParams {
  double mean_coeff = 1.0;
  double std = 0.0;
};

/// sigma_min * (sigma_max / sigma_min)^t. VE only.
double sigma_of_t(const SdeSpec& spec, double t);
/// beta_min + t * (beta_max - beta_min). VP only.
double beta_of_t(const SdeSpec& spec, double t);
/// Closed form of the integral of beta over [0, t]. VP only.
double beta_integral(const SdeSpec& spec, double t);

KernelParams kernel_params(const SdeSpec& spec, double t);

struct Perturbed {
  std::vector<double> xt;
  std::vector<double> z;
};

/// x_t = mean_coeff * x0 + std * z, z ~ N(0, I). t is floored at kTimeEpsilon.
Perturbed perturb(const SdeSpec& spec, std::span<const double> x0, double t, Rng& rng);

/// Gradient of log p_0t(xt | x0) with respect to xt: -(xt - mean_coeff * x0) / std^2.
std::vector<double> score_target(const SdeSpec& spec, std::span<const double> x0,
                                 std::span<const double> xt, double t);

struct DriftDiffusion {
  std::vector<double> drift;
  double diffusion = 0.0;
};

DriftDiffusion drift_diffusion(const SdeSpec& spec, std::span<const double> x, double t);

/// sigma_i = sigma(i / N), i = 1..N (index 0 of the result is sigma_1).
std::vector<double> discrete_sigmas(const SdeSpec& spec);
/// beta_i = beta(i / N) / N, i = 1..N (index 0 of the result is beta_1).
std::vector<double> discrete_betas(const SdeSpec& spec);

/// sigma_i for i in [0, N] with the chain's starting level sigma_0 = 0.
double discrete_sigma(const SdeSpec& spec, std::size_t i);
/// beta_i for i in [1, N].
double discrete_beta(const SdeSpec& spec, std::size_t i);

}  // namespace diffden
