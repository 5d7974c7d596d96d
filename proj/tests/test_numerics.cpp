#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "phx/kernels.h"
#include "phx/numerics.h"
#include "phx/rng.h"

using namespace phx;

TEST_CASE("linear: identity, zero weights, hand case") {
  const Tensor id2 = Tensor::mat(2, 2, {1, 0, 0, 1});
  const Tensor zero_b = Tensor::vec({0, 0});
  const Tensor x = Tensor::vec({3, -1});
  const Tensor r1 = num::linear(id2, zero_b, x);
  CHECK(r1(0) == 3.0);
  CHECK(r1(1) == -1.0);

  const Tensor w0 = Tensor::mat(2, 2, {0, 0, 0, 0});
  const Tensor b = Tensor::vec({0.5, 0.5});
  const Tensor r2 = num::linear(w0, b, x);
  CHECK(r2(0) == 0.5);
  CHECK(r2(1) == 0.5);

  // W = [[1,0],[1,0]], b = [0,1], x = [2,3] -> W^T x + b = [5,1]
  const Tensor w = Tensor::mat(2, 2, {1, 0, 1, 0});
  const Tensor b2 = Tensor::vec({0, 1});
  const Tensor r3 = num::linear(w, b2, Tensor::vec({2, 3}));
  CHECK(r3(0) == 5.0);
  CHECK(r3(1) == 1.0);
}

TEST_CASE("linear rejects shape mismatch") {
  CHECK_THROWS(num::linear(Tensor::mat(2, 2, {1, 0, 0, 1}), Tensor::vec({0, 0}),
                           Tensor::vec({1, 2, 3})));
}

TEST_CASE("relu clamps negatives and is idempotent") {
  const Tensor r = num::relu(Tensor::vec({-1, 0, 2}));
  CHECK(r(0) == 0.0);
  CHECK(r(1) == 0.0);
  CHECK(r(2) == 2.0);
  CHECK(num::relu(Tensor::vec({-5, -1})) == Tensor::vec({0, 0}));
  const Tensor pos = Tensor::vec({1, 2, 3});
  CHECK(num::relu(pos) == pos);
  Rng rng(5);
  Tensor x = Tensor::zeros(64);
  for (int64_t i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2, 2);
  CHECK(num::relu(num::relu(x)) == num::relu(x));
}

TEST_CASE("softmax: symmetry, stability, closed form") {
  const Tensor u = num::softmax(Tensor::vec({0, 0}));
  CHECK(u(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u(1) == doctest::Approx(0.5).epsilon(1e-12));

  const Tensor big = num::softmax(Tensor::vec({1000, 0}));
  CHECK(std::isfinite(big(0)));
  CHECK(big(0) == doctest::Approx(1.0));
  CHECK(big(1) == doctest::Approx(0.0));

  const Tensor c = num::softmax(Tensor::vec({std::log(2.0), 0}));
  CHECK(std::abs(c(0) - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(c(1) - 1.0 / 3.0) < 1e-15);

  CHECK_THROWS(num::softmax(Tensor::zeros(static_cast<int64_t>(0))));
}

TEST_CASE("softmax properties: normalization and shift invariance") {
  Rng rng(11);
  for (int it = 0; it < 30; ++it) {
    const int64_t n = 1 + static_cast<int64_t>(rng.below(8));
    Tensor x = Tensor::zeros(n);
    for (int64_t i = 0; i < n; ++i) x(i) = rng.uniform(-30, 30);
    const Tensor y = num::softmax(x);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      CHECK(y(i) > 0.0);
      sum += y(i);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    const double shift = rng.uniform(-5, 5);
    Tensor xs = x;
    for (int64_t i = 0; i < n; ++i) xs(i) += shift;
    const Tensor ys = num::softmax(xs);
    for (int64_t i = 0; i < n; ++i) CHECK(std::abs(y(i) - ys(i)) <= 1e-12);
  }
}

TEST_CASE("cross_entropy: exact cases and clamping") {
  CHECK(num::cross_entropy(Tensor::vec({1, 0}), 0) == 0.0);
  CHECK(num::cross_entropy(Tensor::vec({0.5, 0.5}), 1) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(num::cross_entropy(Tensor::vec({1e-20, 1}), 0) ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-14));
  CHECK_THROWS(num::cross_entropy(Tensor::vec({0.5, 0.5}), 2));
  CHECK(num::cross_entropy(Tensor::vec({0.3, 0.7}), 1) >= 0.0);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(num::argmax(Tensor::vec({0.5, 0.5})) == 0);
  CHECK(num::argmax(Tensor::vec({0.1, 0.7, 0.7})) == 1);
}

TEST_CASE("grad_check: quadratic and constant") {
  Tensor theta = Tensor::vec({1, 2});
  const auto loss = [&] { return theta(0) * theta(0) + theta(1) * theta(1); };
  const Tensor analytic = Tensor::vec({2, 4});
  const double err = num::grad_check(loss, {&theta}, {&analytic}, {});
  CHECK(err < 1e-8);

  Tensor c = Tensor::vec({3, -1, 4});
  const Tensor zero = Tensor::zeros(3);
  const auto const_loss = [] { return 7.5; };
  CHECK(num::grad_check(const_loss, {&c}, {&zero}, {}) == 0.0);
}

TEST_CASE("grad_check rejects non-finite losses") {
  Tensor t = Tensor::vec({1});
  const Tensor g = Tensor::vec({0});
  const auto bad = [] { return std::numeric_limits<double>::infinity(); };
  CHECK_THROWS(num::grad_check(bad, {&t}, {&g}, {}));
}

TEST_CASE("ensure_finite rejects NaN and Inf") {
  Tensor t = Tensor::vec({1, 2});
  CHECK_NOTHROW(ensure_finite(t, "test"));
  t(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(ensure_finite(t, "test"));
}

// The OpenMP kernels and the serial references must agree bit for bit:
// both compute each output element with one serial inner loop.
TEST_CASE("kernel parity: omp == serial, bit-exact") {
  Rng rng(2024);
  for (int it = 0; it < 20; ++it) {
    const int64_t m = 1 + static_cast<int64_t>(rng.below(40));
    const int64_t k = 1 + static_cast<int64_t>(rng.below(40));
    const int64_t n = 1 + static_cast<int64_t>(rng.below(40));
    std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n));
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    for (const bool ta : {false, true})
      for (const bool tb : {false, true}) {
        std::vector<double> cs(static_cast<size_t>(m * n)), cp(cs);
        kern::serial::matmul(a.data(), b.data(), cs.data(), m, k, n, ta, tb, false);
        kern::matmul(a.data(), b.data(), cp.data(), m, k, n, ta, tb, false);
        CHECK(cs == cp);
      }
  }

  const int64_t rows = 37, cols = 19;
  std::vector<double> x(static_cast<size_t>(rows * cols));
  for (auto& v : x) v = rng.uniform(-4, 4);
  std::vector<double> ys(x.size()), yp(x.size());
  kern::serial::softmax_rows(x.data(), ys.data(), rows, cols);
  kern::softmax_rows(x.data(), yp.data(), rows, cols);
  CHECK(ys == yp);

  std::vector<double> g(static_cast<size_t>(cols), 1.0),
      be(static_cast<size_t>(cols), 0.1);
  kern::serial::layer_norm_rows(x.data(), g.data(), be.data(), ys.data(), rows,
                                cols, 1e-5);
  kern::layer_norm_rows(x.data(), g.data(), be.data(), yp.data(), rows, cols,
                        1e-5);
  CHECK(ys == yp);

  kern::serial::relu(x.data(), ys.data(), static_cast<int64_t>(x.size()));
  kern::relu(x.data(), yp.data(), static_cast<int64_t>(x.size()));
  CHECK(ys == yp);

  const int64_t nq = 513, d = 24;
  std::vector<double> store(static_cast<size_t>(nq * d)),
      norms(static_cast<size_t>(nq));
  for (auto& v : store) v = rng.uniform(-1, 1);
  for (int64_t r = 0; r < nq; ++r) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j)
      s += store[static_cast<size_t>(r * d + j)] * store[static_cast<size_t>(r * d + j)];
    norms[static_cast<size_t>(r)] = std::sqrt(s);
  }
  std::vector<double> q(static_cast<size_t>(d));
  for (auto& v : q) v = rng.uniform(-1, 1);
  double qn = 0.0;
  for (double v : q) qn += v * v;
  qn = std::sqrt(qn);
  std::vector<double> ss(static_cast<size_t>(nq)), sp(static_cast<size_t>(nq));
  kern::serial::cosine_scores(q.data(), qn, store.data(), norms.data(), ss.data(), nq, d);
  kern::cosine_scores(q.data(), qn, store.data(), norms.data(), sp.data(), nq, d);
  CHECK(ss == sp);
}

TEST_CASE("matmul transpose flags against the untransposed layout") {
  Rng rng(7);
  const int64_t m = 5, k = 4, n = 3;
  std::vector<double> a(static_cast<size_t>(m * k)), at(static_cast<size_t>(k * m));
  std::vector<double> b(static_cast<size_t>(k * n)), bt(static_cast<size_t>(n * k));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const double v = rng.uniform(-2, 2);
      a[static_cast<size_t>(i * k + p)] = v;
      at[static_cast<size_t>(p * m + i)] = v;
    }
  for (int64_t p = 0; p < k; ++p)
    for (int64_t j = 0; j < n; ++j) {
      const double v = rng.uniform(-2, 2);
      b[static_cast<size_t>(p * n + j)] = v;
      bt[static_cast<size_t>(j * k + p)] = v;
    }
  std::vector<double> base(static_cast<size_t>(m * n)), other(base);
  kern::matmul(a.data(), b.data(), base.data(), m, k, n, false, false, false);
  kern::matmul(at.data(), b.data(), other.data(), m, k, n, true, false, false);
  CHECK(base == other);
  kern::matmul(a.data(), bt.data(), other.data(), m, k, n, false, true, false);
  CHECK(base == other);
  kern::matmul(at.data(), bt.data(), other.data(), m, k, n, true, true, false);
  CHECK(base == other);
}
