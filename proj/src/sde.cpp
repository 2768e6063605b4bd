#include "diffden/sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffden/error.hpp"

namespace diffden {
namespace {

void require_kind(const SdeSpec& spec, SdeKind kind) {
  if (spec.kind != kind)
    throw Error(Errc::WrongKind, "operation requires a " + std::string(sde_kind_name(kind)) +
                                     " spec");
}

void require_time(const SdeSpec& spec, double t) {
  if (!(t >= 0.0 && t <= spec.horizon))
    throw Error(Errc::OutOfRangeT, "t = " + std::to_string(t) + " outside [0, T]");
}

}  // namespace

std::string_view sde_kind_name(SdeKind k) noexcept { return k == SdeKind::VE ? "ve" : "vp"; }

SdeKind parse_sde_kind(std::string_view name) {
  if (name == "ve" || name == "VE") return SdeKind::VE;
  if (name == "vp" || name == "VP") return SdeKind::VP;
  throw Error(Errc::BadConfig, "unknown sde kind '" + std::string(name) + "'");
}

void SdeSpec::validate() const {
  if (n_steps < 2) throw Error(Errc::BadParams, "n_steps must be >= 2");
  if (horizon != 1.0) throw Error(Errc::BadParams, "horizon T must be 1");
  if (kind == SdeKind::VE && !(sigma_min > 0.0 && sigma_min < sigma_max))
    throw Error(Errc::BadParams, "VE needs 0 < sigma_min < sigma_max");
  if (kind == SdeKind::VP && !(beta_min > 0.0 && beta_min < beta_max))
    throw Error(Errc::BadParams, "VP needs 0 < beta_min < beta_max");
}

double sigma_of_t(const SdeSpec& spec, double t) {
  require_kind(spec, SdeKind::VE);
  return spec.sigma_min * std::pow(spec.sigma_max / spec.sigma_min, t);
}

double beta_of_t(const SdeSpec& spec, double t) {
  require_kind(spec, SdeKind::VP);
  return spec.beta_min + t * (spec.beta_max - spec.beta_min);
}

double beta_integral(const SdeSpec& spec, double t) {
  require_kind(spec, SdeKind::VP);
  return spec.beta_min * t + 0.5 * t * t * (spec.beta_max - spec.beta_min);
}

KernelParams kernel_params(const SdeSpec& spec, double t) {
  require_time(spec, t);
  if (spec.kind == SdeKind::VE) return {1.0, sigma_of_t(spec, t)};
  const double integral = beta_integral(spec, t);
  // -expm1(-x) keeps the std accurate near t = 0.
  return {std::exp(-0.5 * integral), std::sqrt(-std::expm1(-integral))};
}

Perturbed perturb(const SdeSpec& spec, std::span<const double> x0, double t, Rng& rng) {
  const KernelParams k = kernel_params(spec, std::max(t, kTimeEpsilon));
  Perturbed out{std::vector<double>(x0.size()), std::vector<double>(x0.size())};
  rng.fill_gaussian(out.z);
  for (std::size_t i = 0; i < x0.size(); ++i) out.xt[i] = k.mean_coeff * x0[i] + k.std * out.z[i];
  return out;
}

std::vector<double> score_target(const SdeSpec& spec, std::span<const double> x0,
                                 std::span<const double> xt, double t) {
  if (x0.size() != xt.size()) throw Error(Errc::LengthMismatch, "x0 and xt differ in length");
  const KernelParams k = kernel_params(spec, t);
  if (!(k.std > 0.0)) throw Error(Errc::ZeroStd, "kernel std is zero at t = " + std::to_string(t));
  const double inv_var = 1.0 / (k.std * k.std);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = -(xt[i] - k.mean_coeff * x0[i]) * inv_var;
  return out;
}

DriftDiffusion drift_diffusion(const SdeSpec& spec, std::span<const double> x, double t) {
  require_time(spec, t);
  DriftDiffusion out{std::vector<double>(x.size(), 0.0), 0.0};
  if (spec.kind == SdeKind::VE) {
    // d sigma^2 / dt = 2 sigma^2 log(sigma_max / sigma_min)
    const double sigma = sigma_of_t(spec, t);
    out.diffusion = sigma * std::sqrt(2.0 * std::log(spec.sigma_max / spec.sigma_min));
    return out;
  }
  const double beta = beta_of_t(spec, t);
  for (std::size_t i = 0; i < x.size(); ++i) out.drift[i] = -0.5 * beta * x[i];
  out.diffusion = std::sqrt(beta);
  return out;
}

double discrete_sigma(const SdeSpec& spec, std::size_t i) {
  if (i > spec.n_steps) throw Error(Errc::IndexOutOfRange, "sigma index beyond N");
  if (i == 0) return 0.0;
  return sigma_of_t(spec, static_cast<double>(i) / static_cast<double>(spec.n_steps));
}

double discrete_beta(const SdeSpec& spec, std::size_t i) {
  if (i == 0 || i > spec.n_steps) throw Error(Errc::IndexOutOfRange, "beta index outside [1, N]");
  const double n = static_cast<double>(spec.n_steps);
  return beta_of_t(spec, static_cast<double>(i) / n) / n;
}

std::vector<double> discrete_sigmas(const SdeSpec& spec) {
  std::vector<double> out(spec.n_steps);
  for (std::size_t i = 1; i <= spec.n_steps; ++i) out[i - 1] = discrete_sigma(spec, i);
  return out;
}

std::vector<double> discrete_betas(const SdeSpec& spec) {
  std::vector<double> out(spec.n_steps);
  for (std::size_t i = 1; i <= spec.n_steps; ++i) out[i - 1] = discrete_beta(spec, i);
  return out;
}

}  // namespace diffden
