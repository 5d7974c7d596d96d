// Local interpretability: per-concept activation differences, local label
// distributions, relevance scores, and the aggregated local loss.
#ifndef PHX_LIL_H
#define PHX_LIL_H

#include <cstdint>
#include <utility>
#include <vector>

#include "phx/encoder.h"
#include "phx/rng.h"
#include "phx/tensor.h"

namespace phx::lil {

struct LilParams {
  Tensor w_v, b_v;  // D x C head over activation differences
  Tensor scorer;    // D, produces the per-concept aggregation logits

  std::vector<Tensor*> tensors() { return {&w_v, &b_v, &scorer}; }
  std::vector<const Tensor*> tensors() const { return {&w_v, &b_v, &scorer}; }
};

LilParams init_lil(int64_t dim, int64_t n_classes, Rng& rng);

struct LocalForward {
  Tensor t;  // J x D, relu(u_j) - relu(u_S)
  Tensor s;  // J x C, one distribution per concept
};

LocalForward local_dists(const enc::EncodedSample& enc, const LilParams& p);

// r_j = l_Y[P_C] - s_j[P_C]
double relevance(const Tensor& l_y, int64_t p_c, const Tensor& s_j);

// l_L = sum_j w_sj s_j with mixture weights softmax_j(scorer . t_j);
// requires J >= 1.
Tensor lil_mix(const LocalForward& fwd, const LilParams& p);

// (l_L, L_L)
std::pair<Tensor, double> lil_loss(const LocalForward& fwd, const LilParams& p,
                                   int64_t y);

// indices of the top-k concepts by descending r, ties by concept order
std::vector<int64_t> rank_local(const std::vector<double>& r, int64_t k);

}  // namespace phx::lil

#endif
