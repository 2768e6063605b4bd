#include "diffden/kernels.hpp"

namespace diffden::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(const double* a, const double* w, const double* bias, double* c,
                    std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      double s = dot_scalar(ai, w + j * k, k);
      ci[j] = bias ? s + bias[j] : s;
    }
  }
}

void gemm_nn_scalar(const double* g, const double* w, double* c, std::size_t m, std::size_t n,
                    std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) ci[p] = 0.0;
    for (std::size_t j = 0; j < n; ++j) axpy_scalar(g[i * n + j], w + j * k, ci, k);
  }
}

void gemm_tn_acc_scalar(const double* g, const double* a, double* d, std::size_t m,
                        std::size_t n, std::size_t k) {
  for (std::size_t j = 0; j < n; ++j) {
    double* dj = d + j * k;
    for (std::size_t i = 0; i < m; ++i) axpy_scalar(g[i * n + j], a + i * k, dj, k);
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar,    "scalar",       dot_scalar,
                                 axpy_scalar,    gemm_nt_scalar, gemm_nn_scalar,
                                 gemm_tn_acc_scalar};
  return table;
}

}  // namespace diffden::kernels
