// FFTW-backed DFT helpers. Plans are created once per (length, direction) and
// executed in place through the new-array interface, so callers never share buffers.

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "diffden/denoiser.hpp"
#include "diffden/error.hpp"

namespace diffden {
namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mu_);
    auto it = plans_.find({n, sign});
    if (it != plans_.end()) return it->second;
    // In-place plan, matching how transform() executes it. FFTW_ESTIMATE
    // leaves the buffer untouched; FFTW_UNALIGNED allows std::vector storage.
    fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    plans_.emplace(std::make_pair(n, sign), plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

void transform(std::vector<std::complex<double>>& data, int sign) {
  const int n = static_cast<int>(data.size());
  fftw_plan plan = plans().get(n, sign);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

std::vector<std::complex<double>> fft(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::EmptyInput, "fft of an empty series");
  std::vector<std::complex<double>> data(x.begin(), x.end());
  transform(data, FFTW_FORWARD);
  return data;
}

std::vector<double> ifft_real(std::span<const std::complex<double>> spectrum) {
  if (spectrum.empty()) throw Error(Errc::EmptyInput, "ifft of an empty spectrum");
  std::vector<std::complex<double>> data(spectrum.begin(), spectrum.end());
  transform(data, FFTW_BACKWARD);
  const double inv = 1.0 / static_cast<double>(data.size());
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i].real() * inv;
  return out;
}

std::vector<std::complex<double>> fourier_filter(std::span<const double> x, double f) {
  if (!(f >= 0.0)) throw Error(Errc::BadParams, "fourier threshold must be >= 0");
  auto spec = fft(x);
  const std::size_t n = spec.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    if (std::abs(spec[k]) * inv_n < f) {
      spec[k] = 0.0;
      spec[n - k] = 0.0;
    }
  }
  return spec;
}

std::vector<double> fourier_target(std::span<const double> c, double f) {
  return ifft_real(fourier_filter(c, f));
}

double fourier_loss(std::span<const double> x, std::span<const double> c, double f) {
  if (x.size() != c.size()) throw Error(Errc::LengthMismatch, "fourier loss inputs differ");
  const auto sx = fft(x);
  const auto sc = fourier_filter(c, f);
  double loss = 0.0;
  for (std::size_t k = 0; k < sx.size(); ++k) loss += std::norm(sx[k] - sc[k]);
  return loss / static_cast<double>(sx.size());
}

std::vector<double> fourier_grad(std::span<const double> x, std::span<const double> c,
                                 double f) {
  if (x.size() != c.size()) throw Error(Errc::LengthMismatch, "fourier grad inputs differ");
  const auto y = fourier_target(c, f);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * (x[i] - y[i]);
  return g;
}

}  // namespace diffden
