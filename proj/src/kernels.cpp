#include "phx/kernels.h"

#include <cmath>

namespace phx::kern {

namespace {

// Parallelism is an if-clause so the serial wrappers and small shapes take
// the identical code path.
constexpr int64_t kMatmulGrain = 1 << 14;  // m*n*k
constexpr int64_t kRowGrain = 8;
constexpr int64_t kEltGrain = 1 << 15;

inline void matmul_core(const double* a, const double* b, double* c, int64_t m,
                        int64_t k, int64_t n, bool ta, bool tb, bool acc,
                        bool par) {
  const bool go = par && m * n * k >= kMatmulGrain && m > 1;
  if (!tb) {
    // row-of-C at a time; k ascending per output element
#pragma omp parallel for schedule(static) if (go)
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      if (!acc)
        for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
      for (int64_t p = 0; p < k; ++p) {
        const double aip = ta ? a[p * m + i] : a[i * k + p];
        const double* brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else {
    // op(B) rows are contiguous in B; plain dot per element
#pragma omp parallel for schedule(static) if (go)
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (int64_t p = 0; p < k; ++p)
          s += (ta ? a[p * m + i] : a[i * k + p]) * brow[p];
        crow[j] = acc ? crow[j] + s : s;
      }
    }
  }
}

inline void relu_core(const double* x, double* y, int64_t n, bool par) {
  const bool go = par && n >= kEltGrain;
#pragma omp parallel for schedule(static) if (go)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void softmax_row(const double* x, double* y, int64_t cols) {
  double mx = x[0];
  for (int64_t j = 1; j < cols; ++j)
    if (x[j] > mx) mx = x[j];
  double sum = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  for (int64_t j = 0; j < cols; ++j) y[j] /= sum;
}

inline void softmax_rows_core(const double* x, double* y, int64_t rows,
                              int64_t cols, bool par) {
  const bool go = par && rows >= kRowGrain;
#pragma omp parallel for schedule(static) if (go)
  for (int64_t i = 0; i < rows; ++i)
    softmax_row(x + i * cols, y + i * cols, cols);
}

inline void layer_norm_row(const double* x, const double* gain,
                           const double* bias, double* y, int64_t cols,
                           double eps) {
  double mean = 0.0;
  for (int64_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (int64_t j = 0; j < cols; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (int64_t j = 0; j < cols; ++j)
    y[j] = (x[j] - mean) * inv * gain[j] + bias[j];
}

inline void layer_norm_rows_core(const double* x, const double* gain,
                                 const double* bias, double* y, int64_t rows,
                                 int64_t cols, double eps, bool par) {
  const bool go = par && rows >= kRowGrain;
#pragma omp parallel for schedule(static) if (go)
  for (int64_t i = 0; i < rows; ++i)
    layer_norm_row(x + i * cols, gain, bias, y + i * cols, cols, eps);
}

inline void cosine_scores_core(const double* q, double qnorm,
                               const double* rows, const double* norms,
                               double* out, int64_t n, int64_t d, bool par) {
  const bool go = par && n >= 64;
#pragma omp parallel for schedule(static) if (go)
  for (int64_t r = 0; r < n; ++r) {
    const double* row = rows + r * d;
    double dot = 0.0;
    for (int64_t j = 0; j < d; ++j) dot += q[j] * row[j];
    out[r] = dot / (qnorm * norms[r]);
  }
}

}  // namespace

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n, bool ta, bool tb, bool acc) {
  matmul_core(a, b, c, m, k, n, ta, tb, acc, true);
}
void relu(const double* x, double* y, int64_t n) { relu_core(x, y, n, true); }
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols) {
  softmax_rows_core(x, y, rows, cols, true);
}
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, int64_t rows, int64_t cols, double eps) {
  layer_norm_rows_core(x, gain, bias, y, rows, cols, eps, true);
}
void cosine_scores(const double* q, double qnorm, const double* rows,
                   const double* norms, double* out, int64_t n, int64_t d) {
  cosine_scores_core(q, qnorm, rows, norms, out, n, d, true);
}

namespace serial {
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n, bool ta, bool tb, bool acc) {
  matmul_core(a, b, c, m, k, n, ta, tb, acc, false);
}
void relu(const double* x, double* y, int64_t n) { relu_core(x, y, n, false); }
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols) {
  softmax_rows_core(x, y, rows, cols, false);
}
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, int64_t rows, int64_t cols, double eps) {
  layer_norm_rows_core(x, gain, bias, y, rows, cols, eps, false);
}
void cosine_scores(const double* q, double qnorm, const double* rows,
                   const double* norms, double* out, int64_t n, int64_t d) {
  cosine_scores_core(q, qnorm, rows, norms, out, n, d, false);
}
}  // namespace serial

}  // namespace phx::kern
