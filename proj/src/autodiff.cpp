#include "phx/autodiff.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "phx/kernels.h"

namespace phx {

int Tape::push(Tensor v, std::function<void(Tape&)> bwd) {
  Node n;
  n.val = std::move(v);
  n.bwd = std::move(bwd);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_ref(int i) {
  Node& n = nodes_[i];
  if (n.grad.size() == 0 && val(i).size() > 0) {
    const Tensor& v = val(i);
    n.grad = v.rank() == 2 ? Tensor::zeros(v.rows(), v.cols())
                           : Tensor::zeros(v.size());
  }
  return n.grad;
}

int Tape::param(const Tensor* p, int pid) {
  Node n;
  n.ext = p;
  n.pid = pid;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Tensor v) { return push(std::move(v), nullptr); }

int Tape::gather_rows(int src, std::vector<int64_t> ids) {
  const Tensor& s = val(src);
  const int64_t d = s.cols();
  Tensor out = Tensor::zeros(static_cast<int64_t>(ids.size()), d);
  for (size_t r = 0; r < ids.size(); ++r)
    for (int64_t j = 0; j < d; ++j) out(static_cast<int64_t>(r), j) = s(ids[r], j);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [src, self, ids = std::move(ids)](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gs = t.grad_ref(src);
    const int64_t d = g.cols();
    for (size_t r = 0; r < ids.size(); ++r)
      for (int64_t j = 0; j < d; ++j)
        gs(ids[r], j) += g(static_cast<int64_t>(r), j);
  });
}

int Tape::rows_mean_gather(int src, std::vector<int64_t> ids) {
  if (ids.empty()) throw std::invalid_argument("rows_mean_gather: empty ids");
  const Tensor& s = val(src);
  const int64_t d = s.cols();
  const double inv = 1.0 / static_cast<double>(ids.size());
  Tensor out = Tensor::zeros(1, d);
  for (int64_t id : ids)
    for (int64_t j = 0; j < d; ++j) out(0, j) += s(id, j);
  for (int64_t j = 0; j < d; ++j) out(0, j) *= inv;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [src, self, inv, ids = std::move(ids)](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gs = t.grad_ref(src);
    for (int64_t id : ids)
      for (int64_t j = 0; j < g.cols(); ++j) gs(id, j) += g(0, j) * inv;
  });
}

int Tape::add(int a, int b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = x;
  for (int64_t i = 0; i < out.size(); ++i) out(i) += y(i);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, b, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    Tensor& gb = t.grad_ref(b);
    for (int64_t i = 0; i < g.size(); ++i) {
      ga(i) += g(i);
      gb(i) += g(i);
    }
  });
}

int Tape::sub(int a, int b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  if (!x.same_shape(y)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = x;
  for (int64_t i = 0; i < out.size(); ++i) out(i) -= y(i);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, b, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    Tensor& gb = t.grad_ref(b);
    for (int64_t i = 0; i < g.size(); ++i) {
      ga(i) += g(i);
      gb(i) -= g(i);
    }
  });
}

int Tape::add_rowvec(int m, int v) {
  const Tensor& x = val(m);
  const Tensor& b = val(v);
  if (b.size() != x.cols()) throw std::invalid_argument("add_rowvec: shape");
  Tensor out = x;
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j) out(i, j) += b(j);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [m, v, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gm = t.grad_ref(m);
    Tensor& gv = t.grad_ref(v);
    for (int64_t i = 0; i < g.rows(); ++i)
      for (int64_t j = 0; j < g.cols(); ++j) {
        gm(i, j) += g(i, j);
        gv(j) += g(i, j);
      }
  });
}

int Tape::sub_rowvec(int m, int v) {
  const Tensor& x = val(m);
  const Tensor& b = val(v);
  if (b.size() != x.cols()) throw std::invalid_argument("sub_rowvec: shape");
  Tensor out = x;
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < x.cols(); ++j) out(i, j) -= b(j);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [m, v, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& gm = t.grad_ref(m);
    Tensor& gv = t.grad_ref(v);
    for (int64_t i = 0; i < g.rows(); ++i)
      for (int64_t j = 0; j < g.cols(); ++j) {
        gm(i, j) += g(i, j);
        gv(j) -= g(i, j);
      }
  });
}

int Tape::scale(int a, double c) {
  Tensor out = val(a);
  for (int64_t i = 0; i < out.size(); ++i) out(i) *= c;
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, c, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i) ga(i) += c * g(i);
  });
}

int Tape::matmul(int a, int b, bool tb) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  const int64_t m = x.rows(), k = x.cols();
  const int64_t n = tb ? y.rows() : y.cols();
  if ((tb ? y.cols() : y.rows()) != k)
    throw std::invalid_argument("matmul: inner dim mismatch");
  Tensor out = Tensor::zeros(m, n);
  kern::matmul(x.data(), y.data(), out.data(), m, k, n, false, tb, false);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, b, tb, m, k, n, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.val(a);
    const Tensor& y = t.val(b);
    Tensor& ga = t.grad_ref(a);
    Tensor& gb = t.grad_ref(b);
    if (!tb) {
      // dA += g . B^T ; dB += A^T . g
      kern::matmul(g.data(), y.data(), ga.data(), m, n, k, false, true, true);
      kern::matmul(x.data(), g.data(), gb.data(), k, m, n, true, false, true);
    } else {
      // B stored n x k: dA += g . B ; dB += g^T . A
      kern::matmul(g.data(), y.data(), ga.data(), m, n, k, false, false, true);
      kern::matmul(g.data(), x.data(), gb.data(), n, m, k, true, false, true);
    }
  });
}

int Tape::relu(int a) {
  const Tensor& x = val(a);
  Tensor out = x;
  kern::relu(x.data(), out.data(), x.size());
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.val(a);
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i)
      if (x(i) > 0.0) ga(i) += g(i);  // subgradient at 0 is 0
  });
}

int Tape::softmax_rows(int a) {
  const Tensor& x = val(a);
  Tensor out = x;
  kern::softmax_rows(x.data(), out.data(), x.rows(), x.cols());
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.val(self);
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int64_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
      for (int64_t j = 0; j < g.cols(); ++j)
        ga(i, j) += (g(i, j) - dot) * y(i, j);
    }
  });
}

int Tape::layer_norm_rows(int a, int gain, int bias, double eps) {
  const Tensor& x = val(a);
  const Tensor& gvec = val(gain);
  const Tensor& bvec = val(bias);
  if (gvec.size() != x.cols() || bvec.size() != x.cols())
    throw std::invalid_argument("layer_norm_rows: gain/bias shape");
  Tensor out = Tensor::zeros(x.rows(), x.cols());
  kern::layer_norm_rows(x.data(), gvec.data(), bvec.data(), out.data(),
                        x.rows(), x.cols(), eps);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, gain, bias, eps, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.val(a);
    const Tensor& gvec = t.val(gain);
    Tensor& gx = t.grad_ref(a);
    Tensor& gg = t.grad_ref(gain);
    Tensor& gb = t.grad_ref(bias);
    const int64_t cols = x.cols();
    const double invc = 1.0 / static_cast<double>(cols);
    for (int64_t i = 0; i < x.rows(); ++i) {
      double mean = 0.0;
      for (int64_t j = 0; j < cols; ++j) mean += x(i, j);
      mean *= invc;
      double var = 0.0;
      for (int64_t j = 0; j < cols; ++j) {
        const double d = x(i, j) - mean;
        var += d * d;
      }
      var *= invc;
      const double inv = 1.0 / std::sqrt(var + eps);
      double m1 = 0.0, m2 = 0.0;  // mean(dy*gain), mean(dy*gain*xhat)
      for (int64_t j = 0; j < cols; ++j) {
        const double xhat = (x(i, j) - mean) * inv;
        const double dyg = g(i, j) * gvec(j);
        m1 += dyg;
        m2 += dyg * xhat;
        gg(j) += g(i, j) * xhat;
        gb(j) += g(i, j);
      }
      m1 *= invc;
      m2 *= invc;
      for (int64_t j = 0; j < cols; ++j) {
        const double xhat = (x(i, j) - mean) * inv;
        gx(i, j) += (g(i, j) * gvec(j) - m1 - xhat * m2) * inv;
      }
    }
  });
}

int Tape::span_means(int a, std::vector<std::pair<int64_t, int64_t>> spans,
                     int64_t off) {
  const Tensor& x = val(a);
  const int64_t d = x.cols();
  Tensor out = Tensor::zeros(static_cast<int64_t>(spans.size()), d);
  for (size_t j = 0; j < spans.size(); ++j) {
    const auto [s, e] = spans[j];
    const double inv = 1.0 / static_cast<double>(e - s);
    for (int64_t r = s + off; r < e + off; ++r)
      for (int64_t c = 0; c < d; ++c) out(static_cast<int64_t>(j), c) += x(r, c);
    for (int64_t c = 0; c < d; ++c) out(static_cast<int64_t>(j), c) *= inv;
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, off, self, spans = std::move(spans)](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    for (size_t j = 0; j < spans.size(); ++j) {
      const auto [s, e] = spans[j];
      const double inv = 1.0 / static_cast<double>(e - s);
      for (int64_t r = s + off; r < e + off; ++r)
        for (int64_t c = 0; c < g.cols(); ++c)
          ga(r, c) += g(static_cast<int64_t>(j), c) * inv;
    }
  });
}

int Tape::slice_rows(int a, int64_t start, int64_t len) {
  const Tensor& x = val(a);
  Tensor out = Tensor::zeros(len, x.cols());
  for (int64_t i = 0; i < len; ++i)
    for (int64_t j = 0; j < x.cols(); ++j) out(i, j) = x(start + i, j);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, start, len, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < len; ++i)
      for (int64_t j = 0; j < g.cols(); ++j) ga(start + i, j) += g(i, j);
  });
}

int Tape::reshape(int a, int64_t r, int64_t c) {
  const Tensor& x = val(a);
  if (r * c != x.size()) throw std::invalid_argument("reshape: size mismatch");
  Tensor out = Tensor::zeros(r, c);
  for (int64_t i = 0; i < x.size(); ++i) out(i) = x(i);
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [a, self](Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < g.size(); ++i) ga(i) += g(i);
  });
}

int Tape::concat_rows(const std::vector<int>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int64_t rows = 0;
  const int64_t d = val(parts[0]).cols();
  for (int p : parts) rows += val(p).rows();
  Tensor out = Tensor::zeros(rows, d);
  int64_t r0 = 0;
  for (int p : parts) {
    const Tensor& x = val(p);
    for (int64_t i = 0; i < x.rows(); ++i)
      for (int64_t j = 0; j < d; ++j) out(r0 + i, j) = x(i, j);
    r0 += x.rows();
  }
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [parts, self](Tape& t) {
    const Tensor& g = t.grad(self);
    int64_t r0 = 0;
    for (int p : parts) {
      Tensor& gp = t.grad_ref(p);
      for (int64_t i = 0; i < gp.rows(); ++i)
        for (int64_t j = 0; j < g.cols(); ++j) gp(i, j) += g(r0 + i, j);
      r0 += gp.rows();
    }
  });
}

int Tape::cross_entropy(int p, int64_t y) {
  const Tensor& x = val(p);
  if (y < 0 || y >= x.size())
    throw std::invalid_argument("cross_entropy: class out of range");
  Tensor out = Tensor::zeros(1);
  out(0) = -std::log(std::max(x(y), 1e-12));
  const int self = static_cast<int>(nodes_.size());
  return push(std::move(out), [p, y, self](Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.val(p);
    if (x(y) > 1e-12) t.grad_ref(p)(y) -= g(0) / x(y);
  });
}

void Tape::backward(int loss) {
  if (val(loss).size() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  grad_ref(loss)(0) = 1.0;
  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.bwd && n.grad.size() > 0) n.bwd(*this);
  }
}

void Tape::add_param_grads(std::vector<Tensor>& grads, double scale) const {
  for (const Node& n : nodes_) {
    if (n.pid < 0 || n.grad.size() == 0) continue;
    Tensor& dst = grads[static_cast<size_t>(n.pid)];
    for (int64_t i = 0; i < n.grad.size(); ++i) dst(i) += scale * n.grad(i);
  }
}

}  // namespace phx
