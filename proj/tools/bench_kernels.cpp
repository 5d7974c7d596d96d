// Times the OpenMP kernels against the serial reference and checks the
// outputs stay bit-identical.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phx/kernels.h"
#include "phx/rng.h"

using phx::Rng;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void fill(std::vector<double>& v, Rng& rng) {
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
}

void report(const char* name, double ts, double tp, double diff) {
  std::printf("%-18s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   max|diff| %g\n",
              name, ts * 1e3, tp * 1e3, ts / tp, diff);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 0;
  if (argc > 1) threads = std::atoi(argv[1]);
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
  std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without openmp; both columns run the serial path\n");
#endif

  Rng rng(1234);

  {  // matmul 384 x 384 x 384
    const int64_t m = 384, k = 384, n = 384;
    std::vector<double> a(m * k), b(k * n), cs(m * n), cp(m * n);
    fill(a, rng);
    fill(b, rng);
    const double ts = time_of(
        [&] { phx::kern::serial::matmul(a.data(), b.data(), cs.data(), m, k, n, false, false, false); }, 5);
    const double tp = time_of(
        [&] { phx::kern::matmul(a.data(), b.data(), cp.data(), m, k, n, false, false, false); }, 5);
    report("matmul", ts, tp, max_abs_diff(cs, cp));
  }

  {  // softmax over 8192 rows x 512
    const int64_t r = 8192, c = 512;
    std::vector<double> x(r * c), ys(r * c), yp(r * c);
    fill(x, rng);
    const double ts =
        time_of([&] { phx::kern::serial::softmax_rows(x.data(), ys.data(), r, c); }, 10);
    const double tp =
        time_of([&] { phx::kern::softmax_rows(x.data(), yp.data(), r, c); }, 10);
    report("softmax_rows", ts, tp, max_abs_diff(ys, yp));
  }

  {  // layer norm over 8192 rows x 512
    const int64_t r = 8192, c = 512;
    std::vector<double> x(r * c), g(c, 1.0), b(c, 0.0), ys(r * c), yp(r * c);
    fill(x, rng);
    const double ts = time_of(
        [&] { phx::kern::serial::layer_norm_rows(x.data(), g.data(), b.data(), ys.data(), r, c, 1e-5); }, 10);
    const double tp = time_of(
        [&] { phx::kern::layer_norm_rows(x.data(), g.data(), b.data(), yp.data(), r, c, 1e-5); }, 10);
    report("layer_norm_rows", ts, tp, max_abs_diff(ys, yp));
  }

  {  // cosine scan: 200k store rows x 64
    const int64_t n = 200000, d = 64;
    std::vector<double> rows(n * d), q(d), norms(n), ss(n), sp(n);
    fill(rows, rng);
    fill(q, rng);
    double qn = 0.0;
    for (double v : q) qn += v * v;
    qn = std::sqrt(qn);
    for (int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < d; ++j) s += rows[i * d + j] * rows[i * d + j];
      norms[i] = std::sqrt(s);
    }
    const double ts = time_of(
        [&] { phx::kern::serial::cosine_scores(q.data(), qn, rows.data(), norms.data(), ss.data(), n, d); }, 10);
    const double tp = time_of(
        [&] { phx::kern::cosine_scores(q.data(), qn, rows.data(), norms.data(), sp.data(), n, d); }, 10);
    report("cosine_scores", ts, tp, max_abs_diff(ss, sp));
  }

  {  // relu over 32M elements
    const int64_t n = 1 << 25;
    std::vector<double> x(n), ys(n), yp(n);
    fill(x, rng);
    const double ts = time_of([&] { phx::kern::serial::relu(x.data(), ys.data(), n); }, 5);
    const double tp = time_of([&] { phx::kern::relu(x.data(), yp.data(), n); }, 5);
    report("relu", ts, tp, max_abs_diff(ys, yp));
  }

  return 0;
}
