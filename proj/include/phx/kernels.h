// Hot numeric kernels. Each has an OpenMP variant (default) and a serial
// reference in kern::serial used by tests and the benchmark tool. Both
// variants run the same scalar loop per output element, so outputs are
// bit-identical regardless of thread count.
#ifndef PHX_KERNELS_H
#define PHX_KERNELS_H

#include <cstdint>

namespace phx::kern {

// C = op(A) * op(B), logical shapes op(A): m x k, op(B): k x n.
// ta/tb transpose the stored operand; acc accumulates into C instead of
// overwriting. Per-element accumulation order is ascending k either way.
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n, bool ta, bool tb, bool acc);

void relu(const double* x, double* y, int64_t n);

// Row-wise max-subtracted softmax; each row sums to 1 within 1e-12.
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols);

// Row-wise layer normalization with per-column gain/bias.
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, int64_t rows, int64_t cols, double eps);

// out[r] = (q . rows[r]) / (qnorm * norms[r]); caller guarantees norms > 0.
void cosine_scores(const double* q, double qnorm, const double* rows,
                   const double* norms, double* out, int64_t n, int64_t d);

namespace serial {
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
            int64_t n, bool ta, bool tb, bool acc);
void relu(const double* x, double* y, int64_t n);
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols);
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double* y, int64_t rows, int64_t cols, double eps);
void cosine_scores(const double* q, double qnorm, const double* rows,
                   const double* norms, double* out, int64_t n, int64_t d);
}  // namespace serial

}  // namespace phx::kern

#endif
