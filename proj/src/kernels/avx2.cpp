// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// CPUID check, so nothing here may be called from generic code.

#include "diffden/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace diffden::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Same summation order as one lane of the 2x4 block below, so a row's result
// does not depend on how many rows share the call.
double dot_block_order(const double* a, const double* b, std::size_t k) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + p), _mm256_loadu_pd(b + p), acc);
  double s = hsum(acc);
  for (; p < k; ++p) s += a[p] * b[p];
  return s;
}

// 2x4 register block: two rows of `a` against four rows of `w`.
void gemm_nt_avx2(const double* a, const double* w, const double* bias, double* c,
                  std::size_t m, std::size_t n, std::size_t k) {
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* w0 = w + j * k;
      const double* w1 = w0 + k;
      const double* w2 = w1 + k;
      const double* w3 = w2 + k;
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d x0 = _mm256_loadu_pd(a0 + p);
        const __m256d x1 = _mm256_loadu_pd(a1 + p);
        __m256d v = _mm256_loadu_pd(w0 + p);
        c00 = _mm256_fmadd_pd(x0, v, c00);
        c10 = _mm256_fmadd_pd(x1, v, c10);
        v = _mm256_loadu_pd(w1 + p);
        c01 = _mm256_fmadd_pd(x0, v, c01);
        c11 = _mm256_fmadd_pd(x1, v, c11);
        v = _mm256_loadu_pd(w2 + p);
        c02 = _mm256_fmadd_pd(x0, v, c02);
        c12 = _mm256_fmadd_pd(x1, v, c12);
        v = _mm256_loadu_pd(w3 + p);
        c03 = _mm256_fmadd_pd(x0, v, c03);
        c13 = _mm256_fmadd_pd(x1, v, c13);
      }
      double s[2][4] = {{hsum(c00), hsum(c01), hsum(c02), hsum(c03)},
                        {hsum(c10), hsum(c11), hsum(c12), hsum(c13)}};
      for (; p < k; ++p) {
        s[0][0] += a0[p] * w0[p];
        s[0][1] += a0[p] * w1[p];
        s[0][2] += a0[p] * w2[p];
        s[0][3] += a0[p] * w3[p];
        s[1][0] += a1[p] * w0[p];
        s[1][1] += a1[p] * w1[p];
        s[1][2] += a1[p] * w2[p];
        s[1][3] += a1[p] * w3[p];
      }
      for (std::size_t q = 0; q < 4; ++q) {
        const double b = bias ? bias[j + q] : 0.0;
        c[i * n + j + q] = bias ? s[0][q] + b : s[0][q];
        c[(i + 1) * n + j + q] = bias ? s[1][q] + b : s[1][q];
      }
    }
    for (; j < n; ++j) {
      const double* wj = w + j * k;
      const double s0 = dot_block_order(a0, wj, k);
      const double s1 = dot_block_order(a1, wj, k);
      c[i * n + j] = bias ? s0 + bias[j] : s0;
      c[(i + 1) * n + j] = bias ? s1 + bias[j] : s1;
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = dot_block_order(a + i * k, w + j * k, k);
      c[i * n + j] = bias ? s + bias[j] : s;
    }
  }
}

void gemm_nn_avx2(const double* g, const double* w, double* c, std::size_t m, std::size_t n,
                  std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) ci[p] = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const __m256d g0 = _mm256_set1_pd(gi[j]);
      const __m256d g1 = _mm256_set1_pd(gi[j + 1]);
      const __m256d g2 = _mm256_set1_pd(gi[j + 2]);
      const __m256d g3 = _mm256_set1_pd(gi[j + 3]);
      const double* w0 = w + j * k;
      const double* w1 = w0 + k;
      const double* w2 = w1 + k;
      const double* w3 = w2 + k;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        __m256d acc = _mm256_loadu_pd(ci + p);
        acc = _mm256_fmadd_pd(g0, _mm256_loadu_pd(w0 + p), acc);
        acc = _mm256_fmadd_pd(g1, _mm256_loadu_pd(w1 + p), acc);
        acc = _mm256_fmadd_pd(g2, _mm256_loadu_pd(w2 + p), acc);
        acc = _mm256_fmadd_pd(g3, _mm256_loadu_pd(w3 + p), acc);
        _mm256_storeu_pd(ci + p, acc);
      }
      for (; p < k; ++p)
        ci[p] += gi[j] * w0[p] + gi[j + 1] * w1[p] + gi[j + 2] * w2[p] + gi[j + 3] * w3[p];
    }
    for (; j < n; ++j) axpy_avx2(gi[j], w + j * k, ci, k);
  }
}

void gemm_tn_acc_avx2(const double* g, const double* a, double* d, std::size_t m,
                      std::size_t n, std::size_t k) {
  for (std::size_t j = 0; j < n; ++j) {
    double* dj = d + j * k;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      const double g0s = g[i * n + j], g1s = g[(i + 1) * n + j];
      const double g2s = g[(i + 2) * n + j], g3s = g[(i + 3) * n + j];
      const __m256d g0 = _mm256_set1_pd(g0s);
      const __m256d g1 = _mm256_set1_pd(g1s);
      const __m256d g2 = _mm256_set1_pd(g2s);
      const __m256d g3 = _mm256_set1_pd(g3s);
      const double* a0 = a + i * k;
      const double* a1 = a0 + k;
      const double* a2 = a1 + k;
      const double* a3 = a2 + k;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        __m256d acc = _mm256_loadu_pd(dj + p);
        acc = _mm256_fmadd_pd(g0, _mm256_loadu_pd(a0 + p), acc);
        acc = _mm256_fmadd_pd(g1, _mm256_loadu_pd(a1 + p), acc);
        acc = _mm256_fmadd_pd(g2, _mm256_loadu_pd(a2 + p), acc);
        acc = _mm256_fmadd_pd(g3, _mm256_loadu_pd(a3 + p), acc);
        _mm256_storeu_pd(dj + p, acc);
      }
      for (; p < k; ++p) dj[p] += g0s * a0[p] + g1s * a1[p] + g2s * a2[p] + g3s * a3[p];
    }
    for (; i < m; ++i) axpy_avx2(g[i * n + j], a + i * k, dj, k);
  }
}

}  // namespace

const KernelTable* avx2_table_unchecked() noexcept {
  static const KernelTable table{Isa::Avx2,   "avx2",       dot_avx2,        axpy_avx2,
                                 gemm_nt_avx2, gemm_nn_avx2, gemm_tn_acc_avx2};
  return &table;
}

}  // namespace diffden::kernels

#else

namespace diffden::kernels {
const KernelTable* avx2_table_unchecked() noexcept { return nullptr; }
}  // namespace diffden::kernels

#endif
