// Times the OpenMP matmul kernels against their serial references on
// representative shapes and checks the outputs stay bit-identical. Usage:
//   uqtab_bench [threads] [reps]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <vector>

#include "uqtab/kernels.hpp"
#include "uqtab/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double best_ms(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (ms < best) best = ms;
  }
  return best;
}

std::vector<double> random_matrix(int rows, int cols, std::uint64_t index) {
  uqtab::RngStream rng(42, "bench", index);
  std::vector<double> m(static_cast<std::size_t>(rows) * cols);
  for (double& x : m) x = rng.normal();
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  namespace k = uqtab::kernels;
  const int threads = argc > 1 ? std::atoi(argv[1]) : k::max_threads();
  const int reps = argc > 2 ? std::atoi(argv[2]) : 3;
  if (threads < 1 || reps < 1) {
    std::fprintf(stderr, "error: threads and reps must be positive\n");
    return 2;
  }

  struct Case {
    const char* name;
    void (*parallel)(const double*, const double*, double*, int, int, int);
    void (*serial)(const double*, const double*, double*, int, int, int);
    int m, kk, n;
  };
  // Shapes the training loop actually hits: activations x weights for a wide
  // feature block, a gradient accumulation, and a square stress case.
  const Case cases[] = {
      {"matmul    512x588x75", k::matmul, k::ref::matmul, 512, 588, 75},
      {"matmul_tn 588x512x75", k::matmul_tn, k::ref::matmul_tn, 588, 512, 75},
      {"matmul_nt 512x75x588", k::matmul_nt, k::ref::matmul_nt, 512, 75, 588},
      {"matmul    384x384x384", k::matmul, k::ref::matmul, 384, 384, 384},
  };

  std::printf("threads=%d reps=%d (best-of timing)\n", threads, reps);
  bool all_equal = true;
  for (const Case& c : cases) {
    // A is m x kk or kk x m depending on the kernel; allocating the larger
    // of the two layouts keeps the fill logic shape-agnostic.
    const int a_rows = std::max(c.m, c.kk);
    const int b_rows = std::max(c.kk, c.n);
    const std::vector<double> A = random_matrix(a_rows, std::max(c.m, c.kk), 0);
    const std::vector<double> B = random_matrix(b_rows, std::max(c.kk, c.n), 1);
    std::vector<double> out_serial(static_cast<std::size_t>(c.m) * c.n);
    std::vector<double> out_parallel(out_serial.size());

    k::set_max_threads(1);
    const double serial_ms =
        best_ms([&] { c.serial(A.data(), B.data(), out_serial.data(), c.m, c.kk, c.n); },
                reps);
    k::set_max_threads(threads);
    const double parallel_ms =
        best_ms([&] { c.parallel(A.data(), B.data(), out_parallel.data(), c.m, c.kk, c.n); },
                reps);

    const bool equal = std::memcmp(out_serial.data(), out_parallel.data(),
                                   out_serial.size() * sizeof(double)) == 0;
    all_equal = all_equal && equal;
    std::printf("%-22s serial %8.2f ms  parallel %8.2f ms  speedup %5.2fx  %s\n",
                c.name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                equal ? "bitwise equal" : "MISMATCH");
  }
  if (!all_equal) {
    std::fprintf(stderr, "error: parallel kernels diverged from the references\n");
    return 1;
  }
  return 0;
}
