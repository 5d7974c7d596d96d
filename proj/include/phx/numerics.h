// Shape-checked tensor ops used by the inference paths, plus the
// finite-difference gradient oracle.
#ifndef PHX_NUMERICS_H
#define PHX_NUMERICS_H

#include <cstdint>
#include <functional>
#include <vector>

#include "phx/tensor.h"

namespace phx::num {

// W^T x + b with W: D x C, b: C, x: D.
Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x);

Tensor relu(const Tensor& x);

// Max-subtracted softmax over a vector (or the last row-axis of a 1-d
// tensor); entries positive and summing to 1 within 1e-12.
Tensor softmax(const Tensor& x);

// -log p[y] with p[y] clamped at 1e-12.
double cross_entropy(const Tensor& p, int64_t y);

int64_t argmax(const Tensor& v);  // ties -> lowest index

struct GradCheckOptions {
  double eps = 1e-4;
  int64_t min_coords_per_tensor = 100;
  uint64_t seed = 17;
};

// Central-difference check of `analytic` against `loss` evaluated while
// perturbing `params` in place. Returns the max relative error with
// denominator max(|a|, |n|, 1e-8). Coordinates are subsampled per tensor
// when a tensor has more than min_coords_per_tensor entries.
double grad_check(const std::function<double()>& loss,
                  const std::vector<Tensor*>& params,
                  const std::vector<const Tensor*>& analytic,
                  const GradCheckOptions& opt = {});

}  // namespace phx::num

#endif
