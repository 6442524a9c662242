#pragma once

#include <exception>
#include <functional>

namespace uqtab::kernels {

// Worker cap for all OpenMP regions in the repository (the CLI --jobs flag
// lands here). Parallelism only ever partitions independent work items
// across threads; no kernel changes the arithmetic or the order of any
// floating-point reduction. Results are therefore bit-identical for every
// thread count, including 1.
void set_max_threads(int n);
int max_threads();

// Runs body(i) for i in [0, n) under an OpenMP static schedule. body must
// write only to per-index slots. Exceptions are captured and the one thrown
// by the lowest index is rethrown after the loop joins.
void parallel_for(int n, const std::function<void(int)>& body);

// C (m x n) = A (m x k) . B (k x n), all row-major, C overwritten.
void matmul(const double* A, const double* B, double* C, int m, int k, int n);

// C (m x n) = A^T . B with A (k x m), B (k x n).
void matmul_tn(const double* A, const double* B, double* C, int m, int k, int n);

// C (m x n) = A (m x k) . B^T with B (n x k).
void matmul_nt(const double* A, const double* B, double* C, int m, int k, int n);

// Serial reference implementations, kept for tests and the benchmark
// target. The parallel kernels must match these bit for bit.
namespace ref {
void matmul(const double* A, const double* B, double* C, int m, int k, int n);
void matmul_tn(const double* A, const double* B, double* C, int m, int k, int n);
void matmul_nt(const double* A, const double* B, double* C, int m, int k, int n);
}  // namespace ref

}  // namespace uqtab::kernels
