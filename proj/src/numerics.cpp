#include "phx/numerics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phx/kernels.h"
#include "phx/rng.h"

namespace phx {

void ensure_finite(const Tensor& t, const std::string& where) {
  for (int64_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t(i)))
      throw std::runtime_error(where + ": non-finite value at flat index " +
                               std::to_string(i));
}

void ensure_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw std::runtime_error(where + ": non-finite value");
}

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

namespace num {

Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x) {
  const int64_t d = w.rows(), c = w.cols();
  if (w.rank() != 2 || x.size() != d || b.size() != c)
    throw std::invalid_argument("linear: shape mismatch, W" + shape_str(w) +
                                " b" + shape_str(b) + " x" + shape_str(x));
  ensure_finite(x, "linear");
  Tensor out = Tensor::zeros(c);
  kern::matmul(w.data(), x.data(), out.data(), c, d, 1, /*ta=*/true,
               /*tb=*/false, /*acc=*/false);
  for (int64_t i = 0; i < c; ++i) out(i) += b(i);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  kern::relu(x.data(), y.data(), x.size());
  return y;
}

Tensor softmax(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("softmax: empty input");
  ensure_finite(x, "softmax");
  Tensor y = x;
  kern::softmax_rows(x.data(), y.data(), 1, x.size());
  return y;
}

double cross_entropy(const Tensor& p, int64_t y) {
  if (y < 0 || y >= p.size())
    throw std::invalid_argument("cross_entropy: class index " +
                                std::to_string(y) + " out of range for C=" +
                                std::to_string(p.size()));
  return -std::log(std::max(p(y), 1e-12));
}

int64_t argmax(const Tensor& v) {
  int64_t best = 0;
  for (int64_t i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

double grad_check(const std::function<double()>& loss,
                  const std::vector<Tensor*>& params,
                  const std::vector<const Tensor*>& analytic,
                  const GradCheckOptions& opt) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: params/analytic size mismatch");
  Rng rng(opt.seed);
  double max_rel = 0.0;
  for (size_t t = 0; t < params.size(); ++t) {
    Tensor& th = *params[t];
    const Tensor& an = *analytic[t];
    if (!th.same_shape(an))
      throw std::invalid_argument("grad_check: gradient shape mismatch");
    std::vector<int64_t> coords;
    if (th.size() <= opt.min_coords_per_tensor) {
      coords.resize(th.size());
      for (int64_t i = 0; i < th.size(); ++i) coords[i] = i;
    } else {
      // sample without replacement
      std::vector<int64_t> all(th.size());
      for (int64_t i = 0; i < th.size(); ++i) all[i] = i;
      rng.shuffle(all);
      coords.assign(all.begin(), all.begin() + opt.min_coords_per_tensor);
    }
    for (int64_t i : coords) {
      const double orig = th(i);
      th(i) = orig + opt.eps;
      const double fp = loss();
      th(i) = orig - opt.eps;
      const double fm = loss();
      th(i) = orig;
      ensure_finite(fp, "grad_check loss");
      ensure_finite(fm, "grad_check loss");
      const double n = (fp - fm) / (2.0 * opt.eps);
      const double a = an(i);
      const double rel =
          std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace num
}  // namespace phx
