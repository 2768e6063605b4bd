#pragma once

// Dense linear-algebra kernels behind the score network and the sampler.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is chosen once at runtime from CPUID and
// can be pinned with DIFFDEN_KERNELS=scalar|avx2|auto. The two variants agree
// to rounding (they sum in a different order) and each is deterministic.
//
// Matrices are row-major and densely packed.

#include <cstddef>
#include <span>
#include <string_view>

namespace diffden::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;

  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// c[m x n] = a[m x k] * w[n x k]^T (+ bias[n] when bias != nullptr).
  void (*gemm_nt)(const double* a, const double* w, const double* bias, double* c,
                  std::size_t m, std::size_t n, std::size_t k);
  /// c[m x k] = g[m x n] * w[n x k]
  void (*gemm_nn)(const double* g, const double* w, double* c, std::size_t m, std::size_t n,
                  std::size_t k);
  /// d[n x k] += g[m x n]^T * a[m x k]
  void (*gemm_tn_acc)(const double* g, const double* a, double* d, std::size_t m,
                      std::size_t n, std::size_t k);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table() noexcept;

/// The table selected for this process (resolved once, thread-safe).
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace diffden::kernels
