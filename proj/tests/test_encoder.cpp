#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phx/encoder.h"
#include "phx/numerics.h"
#include "test_util.h"

using namespace phx;
using corpus::Sample;

namespace {

Sample sample_of(const std::string& bracketed, const corpus::Vocab& v) {
  Sample s;
  s.id = "t";
  s.parse = corpus::parse_ptb(bracketed);
  s.tokens = corpus::leaf_tokens(s.parse);
  corpus::resolve_token_ids(s, v);
  return s;
}

corpus::Vocab vocab_of(const std::vector<std::string>& words) {
  corpus::Vocab v;
  for (const auto& w : words) v.add(w);
  return v;
}

void zero_sublayers(enc::EncoderParams& p) {
  for (auto& l : p.layers) {
    for (Tensor* t : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                      &l.w1, &l.c1, &l.w2, &l.c2})
      t->fill(0.0);
  }
}

}  // namespace

TEST_CASE("zero sub-layer weights leave the residual stream untouched") {
  Rng rng(3);
  corpus::Vocab v = vocab_of({"a", "b", "c"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 4, 2, 1, 8, rng);
  zero_sublayers(p);
  const Sample s = sample_of("(S (X a) (Y b))", v);
  const auto e = enc::encode(s, p);
  // h_i must equal embedding + positional input exactly
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < 4; ++j)
      CHECK(e.hidden(i, j) ==
            p.embedding(s.token_ids[static_cast<size_t>(i)], j) +
                p.positional(i + 1, j));
  for (int64_t j = 0; j < 4; ++j)
    CHECK(e.pooled(j) == p.embedding(corpus::Vocab::kPool, j) + p.positional(0, j));
}

TEST_CASE("concept representations are span means of hidden rows") {
  Rng rng(4);
  corpus::Vocab v = vocab_of({"a", "b"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 2, 2, 1, 8, rng);
  zero_sublayers(p);
  p.positional.fill(0.0);
  // h rows become exactly [1,2] and [3,4]
  p.embedding(v.id_of("a"), 0) = 1.0;
  p.embedding(v.id_of("a"), 1) = 2.0;
  p.embedding(v.id_of("b"), 0) = 3.0;
  p.embedding(v.id_of("b"), 1) = 4.0;
  const Sample s = sample_of("(S (X (A a) (B b)))", v);
  const auto e = enc::encode(s, p);
  // concepts: X [0,2), A [0,1), B [1,2)
  REQUIRE(e.concept_reprs.rows() == 3);
  CHECK(e.concept_reprs(0, 0) == 2.0);
  CHECK(e.concept_reprs(0, 1) == 3.0);
  // width-1 concepts equal the token state exactly
  CHECK(e.concept_reprs(1, 0) == e.hidden(0, 0));
  CHECK(e.concept_reprs(1, 1) == e.hidden(0, 1));
  CHECK(e.concept_reprs(2, 0) == e.hidden(1, 0));
}

TEST_CASE("u_j stays within the coordinate-wise bounds of its span") {
  Rng rng(5);
  corpus::Vocab v = vocab_of({"w1", "w2", "w3", "w4", "w5"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 8, 2, 2, 16, rng);
  const Sample s =
      sample_of("(S (NP (A w1) (B w2) (C w3)) (VP (D w4) (E w5)))", v);
  const auto e = enc::encode(s, p);
  const auto concepts = corpus::extract_concepts(s);
  REQUIRE(static_cast<int64_t>(concepts.size()) == e.concept_reprs.rows());
  for (size_t c = 0; c < concepts.size(); ++c) {
    for (int64_t j = 0; j < 8; ++j) {
      double lo = e.hidden(concepts[c].start, j), hi = lo;
      for (int64_t i = concepts[c].start; i < concepts[c].end; ++i) {
        lo = std::min(lo, e.hidden(i, j));
        hi = std::max(hi, e.hidden(i, j));
      }
      CHECK(e.concept_reprs(static_cast<int64_t>(c), j) >= lo - 1e-12);
      CHECK(e.concept_reprs(static_cast<int64_t>(c), j) <= hi + 1e-12);
    }
  }
}

TEST_CASE("encode is bit-deterministic") {
  Rng rng(6);
  corpus::Vocab v = vocab_of({"x", "y", "z"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 8, 3, 2, 8, rng);
  const Sample s = sample_of("(S (A x) (B y) (C z))", v);
  const auto e1 = enc::encode(s, p);
  const auto e2 = enc::encode(s, p);
  CHECK(e1.hidden == e2.hidden);
  CHECK(e1.pooled == e2.pooled);
  CHECK(e1.concept_reprs == e2.concept_reprs);
}

TEST_CASE("consistent vocab permutation leaves encodings unchanged") {
  Rng rng(7);
  corpus::Vocab v = vocab_of({"p", "q"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 6, 2, 1, 8, rng);
  const Sample s = sample_of("(S (A p) (B q))", v);
  const auto base = enc::encode(s, p);

  // swap the two word rows and the ids that point at them
  enc::EncoderParams perm = p;
  const int64_t ip = v.id_of("p"), iq = v.id_of("q");
  for (int64_t j = 0; j < 6; ++j)
    std::swap(perm.embedding(ip, j), perm.embedding(iq, j));
  Sample swapped = s;
  for (auto& id : swapped.token_ids) id = (id == ip) ? iq : ip;
  const auto out = enc::encode(swapped, perm);
  CHECK(out.hidden == base.hidden);
  CHECK(out.pooled == base.pooled);
}

TEST_CASE("classify: tie rule, bias dominance, argmax oracle") {
  Rng rng(8);
  enc::EncoderParams p = enc::init_encoder(5, 4, 2, 0, 8, rng);
  p.w_y.fill(0.0);
  p.b_y.fill(0.0);
  const Tensor u = Tensor::vec({0.3, -0.2, 0.1, 0.9});
  auto [l_y, p_c] = enc::classify(u, p);
  CHECK(l_y(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l_y(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p_c == 0);  // tie -> lowest index

  p.b_y(1) = 10.0;
  CHECK(enc::classify(u, p).second == 1);

  // brute-force argmax oracle over random heads
  for (int it = 0; it < 20; ++it) {
    enc::EncoderParams q = enc::init_encoder(5, 4, 3, 0, 8, rng);
    Tensor uu = Tensor::zeros(4);
    for (int64_t i = 0; i < 4; ++i) uu(i) = rng.uniform(-1, 1);
    const auto [dist, pred] = enc::classify(uu, q);
    int64_t best = 0;
    for (int64_t c = 1; c < 3; ++c)
      if (dist(c) > dist(best)) best = c;
    CHECK(pred == best);
  }
}

TEST_CASE("encode rejects sequences beyond T_max and foreign ids") {
  Rng rng(9);
  corpus::Vocab v = vocab_of({"a", "b", "c"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 4, 2, 1, /*t_max=*/2, rng);
  const Sample ok = sample_of("(S (A a) (B b))", v);
  CHECK_NOTHROW(enc::encode(ok, p));
  const Sample too_long = sample_of("(S (A a) (B b) (C c))", v);
  CHECK_THROWS(enc::encode(too_long, p));
  Sample alien = ok;
  alien.token_ids[0] = 999;
  CHECK_THROWS(enc::encode(alien, p));
}

TEST_CASE("gradients of classify(encode) pass the 1e-4 check") {
  Rng rng(10);
  corpus::Vocab v = vocab_of({"a", "b", "c"});
  enc::EncoderParams p = enc::init_encoder(v.size(), 6, 2, 2, 8, rng);
  const Sample s = sample_of("(S (A a) (NP (B b) (C c)))", v);
  const int64_t y = 1;

  auto run = [&](std::vector<Tensor>* grads) {
    Tape tape;
    const auto nodes = enc::bind_encoder(tape, p, 0);
    const int x = enc::encoder_graph(tape, nodes, p, s.token_ids);
    const int us = tape.slice_rows(x, 0, 1);
    const int l_y = tape.softmax_rows(
        tape.add_rowvec(tape.matmul(tape.relu(us), nodes.w_y), nodes.b_y));
    const int loss = tape.cross_entropy(l_y, y);
    if (grads) {
      tape.backward(loss);
      tape.add_param_grads(*grads, 1.0);
    }
    return tape.val(loss)(0);
  };

  auto params = p.tensors();
  std::vector<Tensor> grads;
  for (const Tensor* t : params) {
    Tensor z = *t;
    z.fill(0.0);
    grads.push_back(std::move(z));
  }
  run(&grads);
  std::vector<const Tensor*> analytic;
  for (const auto& g : grads) analytic.push_back(&g);
  const double err =
      num::grad_check([&] { return run(nullptr); }, params, analytic, {});
  CHECK(err < 1e-4);
}
