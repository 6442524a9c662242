#include "uqtab/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uqtab::kernels {

namespace {
int g_max_threads = 1;
}

void set_max_threads(int n) { g_max_threads = std::max(1, n); }
int max_threads() { return g_max_threads; }

void parallel_for(int n, const std::function<void(int)>& body) {
  std::exception_ptr error = nullptr;
  std::int64_t error_index = -1;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) \
    if (g_max_threads > 1 && n > 1)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(uqtab_parallel_for_error)
#endif
      {
        if (error_index < 0 || i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

// Per output element the accumulation order over k is identical in the
// parallel and reference versions, so the results match bit for bit.

void matmul(const double* A, const double* B, double* C, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) \
    if (g_max_threads > 1 && m > 1)
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = C + static_cast<std::size_t>(i) * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = A + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double a = ai[p];
      const double* bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
    }
  }
}

void matmul_tn(const double* A, const double* B, double* C, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) \
    if (g_max_threads > 1 && m > 1)
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = C + static_cast<std::size_t>(i) * n;
    std::fill(ci, ci + n, 0.0);
    for (int b = 0; b < k; ++b) {
      const double a = A[static_cast<std::size_t>(b) * m + i];
      const double* bb = B + static_cast<std::size_t>(b) * n;
      for (int j = 0; j < n; ++j) ci[j] += a * bb[j];
    }
  }
}

void matmul_nt(const double* A, const double* B, double* C, int m, int k, int n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(g_max_threads) \
    if (g_max_threads > 1 && m > 1)
#endif
  for (int i = 0; i < m; ++i) {
    const double* ai = A + static_cast<std::size_t>(i) * k;
    double* ci = C + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = B + static_cast<std::size_t>(j) * k;
      double sum = 0.0;
      for (int p = 0; p < k; ++p) sum += ai[p] * bj[p];
      ci[j] = sum;
    }
  }
}

namespace ref {

void matmul(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int p = 0; p < k; ++p)
        sum += A[static_cast<std::size_t>(i) * k + p] *
               B[static_cast<std::size_t>(p) * n + j];
      C[static_cast<std::size_t>(i) * n + j] = sum;
    }
  }
}

void matmul_tn(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int b = 0; b < k; ++b)
        sum += A[static_cast<std::size_t>(b) * m + i] *
               B[static_cast<std::size_t>(b) * n + j];
      C[static_cast<std::size_t>(i) * n + j] = sum;
    }
  }
}

void matmul_nt(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int p = 0; p < k; ++p)
        sum += A[static_cast<std::size_t>(i) * k + p] *
               B[static_cast<std::size_t>(j) * k + p];
      C[static_cast<std::size_t>(i) * n + j] = sum;
    }
  }
}

}  // namespace ref

}  // namespace uqtab::kernels
