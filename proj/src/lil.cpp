#include "phx/lil.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "phx/kernels.h"
#include "phx/numerics.h"

namespace phx::lil {

LilParams init_lil(int64_t dim, int64_t n_classes, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  LilParams p;
  p.w_v = Tensor::zeros(dim, n_classes);
  p.b_v = Tensor::zeros(n_classes);
  p.scorer = Tensor::zeros(dim);
  for (int64_t i = 0; i < p.w_v.size(); ++i) p.w_v(i) = rng.uniform(-s, s);
  for (int64_t i = 0; i < p.scorer.size(); ++i) p.scorer(i) = rng.uniform(-s, s);
  return p;
}

LocalForward local_dists(const enc::EncodedSample& enc, const LilParams& p) {
  const int64_t j_count = enc.concept_reprs.rows();
  const int64_t d = p.w_v.rows();
  const int64_t c = p.w_v.cols();
  LocalForward out;
  out.t = Tensor::zeros(j_count, d);
  out.s = Tensor::zeros(j_count, c);
  if (j_count == 0) return out;

  const Tensor relu_us = num::relu(enc.pooled);
  Tensor relu_u = enc.concept_reprs;
  kern::relu(enc.concept_reprs.data(), relu_u.data(), relu_u.size());
  for (int64_t j = 0; j < j_count; ++j)
    for (int64_t i = 0; i < d; ++i) out.t(j, i) = relu_u(j, i) - relu_us(i);

  Tensor logits = Tensor::zeros(j_count, c);
  kern::matmul(out.t.data(), p.w_v.data(), logits.data(), j_count, d, c, false,
               false, false);
  for (int64_t j = 0; j < j_count; ++j)
    for (int64_t i = 0; i < c; ++i) logits(j, i) += p.b_v(i);
  kern::softmax_rows(logits.data(), out.s.data(), j_count, c);
  return out;
}

double relevance(const Tensor& l_y, int64_t p_c, const Tensor& s_j) {
  return l_y(p_c) - s_j(p_c);
}

Tensor lil_mix(const LocalForward& fwd, const LilParams& p) {
  const int64_t j_count = fwd.t.rows();
  if (j_count < 1) throw std::invalid_argument("lil_mix: needs J >= 1");
  Tensor logits = Tensor::zeros(j_count);
  kern::matmul(fwd.t.data(), p.scorer.data(), logits.data(), j_count,
               p.scorer.size(), 1, false, false, false);
  Tensor w = Tensor::zeros(j_count);
  kern::softmax_rows(logits.data(), w.data(), 1, j_count);
  const int64_t c = fwd.s.cols();
  Tensor l_l = Tensor::zeros(c);
  kern::matmul(w.data(), fwd.s.data(), l_l.data(), 1, j_count, c, false, false,
               false);
  return l_l;
}

std::pair<Tensor, double> lil_loss(const LocalForward& fwd, const LilParams& p,
                                   int64_t y) {
  Tensor l_l = lil_mix(fwd, p);
  const double loss = num::cross_entropy(l_l, y);
  return {std::move(l_l), loss};
}

std::vector<int64_t> rank_local(const std::vector<double>& r, int64_t k) {
  if (k < 1) throw std::invalid_argument("rank_local: k must be >= 1");
  std::vector<int64_t> idx(r.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    if (r[a] != r[b]) return r[a] > r[b];
    return a < b;
  });
  if (static_cast<int64_t>(idx.size()) > k) idx.resize(static_cast<size_t>(k));
  return idx;
}

}  // namespace phx::lil
