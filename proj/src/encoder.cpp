#include "phx/encoder.h"

#include <cmath>
#include <stdexcept>

#include "phx/numerics.h"

namespace phx::enc {

std::vector<Tensor*> EncoderParams::tensors() {
  std::vector<Tensor*> out{&embedding, &positional};
  for (Layer& l : layers)
    for (Tensor* t : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv,
                      &l.bv, &l.wo, &l.bo, &l.ln2_g, &l.ln2_b, &l.w1, &l.c1,
                      &l.w2, &l.c2})
      out.push_back(t);
  out.push_back(&w_y);
  out.push_back(&b_y);
  return out;
}

std::vector<const Tensor*> EncoderParams::tensors() const {
  auto mut = const_cast<EncoderParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

namespace {

void fill_uniform(Tensor& t, double s, Rng& rng) {
  for (int64_t i = 0; i < t.size(); ++i) t(i) = rng.uniform(-s, s);
}

}  // namespace

EncoderParams init_encoder(int64_t vocab_size, int64_t dim, int64_t n_classes,
                           int64_t n_layers, int64_t t_max, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  EncoderParams p;
  p.embedding = Tensor::zeros(vocab_size, dim);
  p.positional = Tensor::zeros(t_max + 1, dim);
  fill_uniform(p.embedding, s, rng);
  fill_uniform(p.positional, s, rng);
  p.layers.resize(static_cast<size_t>(n_layers));
  for (auto& l : p.layers) {
    l.ln1_g = Tensor::zeros(dim);
    l.ln1_g.fill(1.0);
    l.ln1_b = Tensor::zeros(dim);
    l.wq = Tensor::zeros(dim, dim);
    l.bq = Tensor::zeros(dim);
    l.wk = Tensor::zeros(dim, dim);
    l.bk = Tensor::zeros(dim);
    l.wv = Tensor::zeros(dim, dim);
    l.bv = Tensor::zeros(dim);
    l.wo = Tensor::zeros(dim, dim);
    l.bo = Tensor::zeros(dim);
    l.ln2_g = Tensor::zeros(dim);
    l.ln2_g.fill(1.0);
    l.ln2_b = Tensor::zeros(dim);
    l.w1 = Tensor::zeros(dim, 4 * dim);
    l.c1 = Tensor::zeros(4 * dim);
    l.w2 = Tensor::zeros(4 * dim, dim);
    l.c2 = Tensor::zeros(dim);
    for (Tensor* w : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2})
      fill_uniform(*w, s, rng);
  }
  p.w_y = Tensor::zeros(dim, n_classes);
  p.b_y = Tensor::zeros(n_classes);
  fill_uniform(p.w_y, s, rng);
  return p;
}

EncNodes bind_encoder(Tape& tape, const EncoderParams& p, int pid_start) {
  int pid = pid_start;
  auto next = [&](const Tensor& t) {
    return tape.param(&t, pid_start < 0 ? -1 : pid++);
  };
  EncNodes n;
  n.embedding = next(p.embedding);
  n.positional = next(p.positional);
  for (const auto& l : p.layers) {
    EncNodes::Layer ln;
    ln.ln1_g = next(l.ln1_g);
    ln.ln1_b = next(l.ln1_b);
    ln.wq = next(l.wq);
    ln.bq = next(l.bq);
    ln.wk = next(l.wk);
    ln.bk = next(l.bk);
    ln.wv = next(l.wv);
    ln.bv = next(l.bv);
    ln.wo = next(l.wo);
    ln.bo = next(l.bo);
    ln.ln2_g = next(l.ln2_g);
    ln.ln2_b = next(l.ln2_b);
    ln.w1 = next(l.w1);
    ln.c1 = next(l.c1);
    ln.w2 = next(l.w2);
    ln.c2 = next(l.c2);
    n.layers.push_back(ln);
  }
  n.w_y = next(p.w_y);
  n.b_y = next(p.b_y);
  return n;
}

int encoder_graph(Tape& tape, const EncNodes& n, const EncoderParams& p,
                  const std::vector<int64_t>& token_ids) {
  const int64_t t_len = static_cast<int64_t>(token_ids.size());
  if (t_len > p.t_max())
    throw std::runtime_error("sequence of length " + std::to_string(t_len) +
                             " exceeds T_max=" + std::to_string(p.t_max()));
  for (int64_t id : token_ids)
    if (id < 0 || id >= p.vocab_size())
      throw std::runtime_error("token id out of vocabulary range");

  std::vector<int64_t> ids;
  ids.reserve(static_cast<size_t>(t_len) + 1);
  ids.push_back(corpus::Vocab::kPool);
  ids.insert(ids.end(), token_ids.begin(), token_ids.end());
  std::vector<int64_t> positions(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int64_t>(i);

  int x = tape.add(tape.gather_rows(n.embedding, ids),
                   tape.gather_rows(n.positional, positions));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.dim()));
  for (size_t li = 0; li < p.layers.size(); ++li) {
    const auto& l = n.layers[li];
    int h = tape.layer_norm_rows(x, l.ln1_g, l.ln1_b);
    int q = tape.add_rowvec(tape.matmul(h, l.wq), l.bq);
    int k = tape.add_rowvec(tape.matmul(h, l.wk), l.bk);
    int v = tape.add_rowvec(tape.matmul(h, l.wv), l.bv);
    int att = tape.softmax_rows(tape.scale(tape.matmul(q, k, /*tb=*/true), inv_sqrt_d));
    int ctx = tape.add_rowvec(tape.matmul(tape.matmul(att, v), l.wo), l.bo);
    x = tape.add(x, ctx);
    int h2 = tape.layer_norm_rows(x, l.ln2_g, l.ln2_b);
    int f = tape.relu(tape.add_rowvec(tape.matmul(h2, l.w1), l.c1));
    int f2 = tape.add_rowvec(tape.matmul(f, l.w2), l.c2);
    x = tape.add(x, f2);
  }
  return x;
}

EncodedSample encode(const corpus::Sample& sample, const EncoderParams& p) {
  Tape tape;
  EncNodes nodes = bind_encoder(tape, p, -1);
  const int x = encoder_graph(tape, nodes, p, sample.token_ids);
  const Tensor& states = tape.val(x);
  const int64_t t_len = static_cast<int64_t>(sample.token_ids.size());
  const int64_t d = p.dim();

  EncodedSample out;
  out.pooled = Tensor::zeros(d);
  for (int64_t j = 0; j < d; ++j) out.pooled(j) = states(0, j);
  out.hidden = Tensor::zeros(t_len, d);
  for (int64_t i = 0; i < t_len; ++i)
    for (int64_t j = 0; j < d; ++j) out.hidden(i, j) = states(i + 1, j);

  // sum-then-scale, matching the tape's span_means bit for bit
  const auto concepts = corpus::extract_concepts(sample);
  out.concept_reprs = Tensor::zeros(static_cast<int64_t>(concepts.size()), d);
  for (size_t c = 0; c < concepts.size(); ++c) {
    const double inv = 1.0 / static_cast<double>(concepts[c].end - concepts[c].start);
    for (int64_t i = concepts[c].start; i < concepts[c].end; ++i)
      for (int64_t j = 0; j < d; ++j)
        out.concept_reprs(static_cast<int64_t>(c), j) += out.hidden(i, j);
    for (int64_t j = 0; j < d; ++j)
      out.concept_reprs(static_cast<int64_t>(c), j) *= inv;
  }
  return out;
}

std::pair<Tensor, int64_t> classify(const Tensor& u_s, const EncoderParams& p) {
  ensure_finite(u_s, "classify");
  const Tensor l_y = num::softmax(num::linear(p.w_y, p.b_y, num::relu(u_s)));
  return {l_y, num::argmax(l_y)};
}

}  // namespace phx::enc
