// Reverse-mode tape over Tensors. Values are computed eagerly at op
// creation; backward() replays VJPs in reverse insertion order. Parameter
// leaves reference external tensors (no copy) and are tagged with a
// parameter id so callers can collect gradients per parameter.
#ifndef PHX_AUTODIFF_H
#define PHX_AUTODIFF_H

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "phx/tensor.h"

namespace phx {

class Tape {
 public:
  Tape() { nodes_.reserve(128); }

  // Leaf referencing an external tensor; pid < 0 means "input, no gradient
  // of interest" but gradients still flow through it.
  int param(const Tensor* p, int pid = -1);
  int constant(Tensor v);

  int gather_rows(int src, std::vector<int64_t> ids);
  int rows_mean_gather(int src, std::vector<int64_t> ids);  // 1 x D mean
  int add(int a, int b);
  int sub(int a, int b);
  int add_rowvec(int m, int v);
  int sub_rowvec(int m, int v);
  int scale(int a, double c);
  int matmul(int a, int b, bool tb = false);  // op(A) never transposed
  int relu(int a);
  int softmax_rows(int a);
  int layer_norm_rows(int a, int gain, int bias, double eps = 1e-5);
  // row j = mean of rows [spans[j].first + off, spans[j].second + off)
  int span_means(int a, std::vector<std::pair<int64_t, int64_t>> spans,
                 int64_t off = 0);
  int slice_rows(int a, int64_t start, int64_t len);
  int reshape(int a, int64_t r, int64_t c);
  int concat_rows(const std::vector<int>& parts);
  int cross_entropy(int p, int64_t y);  // scalar node

  const Tensor& val(int i) const {
    const Node& n = nodes_[i];
    return n.ext ? *n.ext : n.val;
  }
  const Tensor& grad(int i) const { return nodes_[i].grad; }

  void backward(int loss);

  // grads[pid] += scale * d(loss)/d(param). Insertion order, deterministic.
  void add_param_grads(std::vector<Tensor>& grads, double scale) const;

 private:
  struct Node {
    Tensor val;
    const Tensor* ext = nullptr;
    Tensor grad;
    std::function<void(Tape&)> bwd;
    int pid = -1;
  };

  int push(Tensor v, std::function<void(Tape&)> bwd);
  Tensor& grad_ref(int i);

  std::vector<Node> nodes_;
};

}  // namespace phx

#endif
