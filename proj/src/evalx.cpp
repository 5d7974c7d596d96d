#include "phx/evalx.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "phx/numerics.h"
#include "phx/rng.h"
#include "phx/trainer.h"

namespace phx::evalx {

using nlohmann::json;

namespace {

std::vector<std::string> label_names(const corpus::LabelManifest& m) {
  std::vector<std::string> names(m.size());
  for (const auto& [name, idx] : m) names[static_cast<size_t>(idx)] = name;
  return names;
}

std::string join_tokens(const std::vector<std::string>& toks, int64_t s,
                        int64_t e) {
  std::string out;
  for (int64_t i = s; i < e; ++i) {
    if (i > s) out += ' ';
    out += toks[i];
  }
  return out;
}

void check_compatible(const model::Checkpoint& ck,
                      const gil::ConceptStore& store) {
  if (store.dim() != ck.params.encoder.dim())
    throw std::runtime_error(
        "store/checkpoint mismatch: store D=" + std::to_string(store.dim()) +
        " vs model D=" + std::to_string(ck.params.encoder.dim()));
}

// classes without support in either series are skipped
double macro_f1(const std::vector<int64_t>& ref,
                const std::vector<int64_t>& cand, int64_t n_classes) {
  double sum = 0.0;
  int64_t used = 0;
  for (int64_t c = 0; c < n_classes; ++c) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < ref.size(); ++i) {
      const bool r = ref[i] == c, p = cand[i] == c;
      if (r && p) ++tp;
      else if (!r && p) ++fp;
      else if (r && !p) ++fn;
    }
    if (tp + fp + fn == 0) continue;
    sum += 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    ++used;
  }
  return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

}  // namespace

json report_to_json(const ExplanationReport& r) {
  json local = json::array();
  for (const auto& it : r.local)
    local.push_back(
        {{"phrase", it.phrase}, {"span", {it.start, it.end}}, {"r", it.r}});
  json global = json::array();
  for (const auto& it : r.global)
    global.push_back({{"phrase", it.phrase},
                      {"source", it.source},
                      {"row", it.store_row},
                      {"d", it.score},
                      {"p", it.prob}});
  return json{{"id", r.id},     {"text", r.text},   {"gold", r.gold},
              {"pred", r.pred}, {"local", local},   {"global", global}};
}

ExplanationReport explain(const corpus::Sample& sample,
                          const model::Checkpoint& ck,
                          const gil::ConceptStore& store, int64_t k,
                          int64_t top_local) {
  check_compatible(ck, store);
  const auto names = label_names(ck.labels);

  const auto encd = enc::encode(sample, ck.params.encoder);
  const auto [l_y, p_c] = enc::classify(encd.pooled, ck.params.encoder);

  ExplanationReport rep;
  rep.id = sample.id;
  rep.text = join_tokens(sample.tokens, 0, static_cast<int64_t>(sample.tokens.size()));
  rep.gold = names.at(static_cast<size_t>(sample.label));
  rep.pred = names.at(static_cast<size_t>(p_c));

  const auto concepts = corpus::extract_concepts(sample);
  if (!concepts.empty()) {
    const auto fwd = lil::local_dists(encd, ck.params.lil);
    std::vector<double> r(concepts.size());
    for (size_t j = 0; j < concepts.size(); ++j) {
      Tensor s_j = Tensor::zeros(fwd.s.cols());
      for (int64_t i = 0; i < fwd.s.cols(); ++i) s_j(i) = fwd.s(static_cast<int64_t>(j), i);
      r[j] = lil::relevance(l_y, p_c, s_j);
    }
    for (int64_t idx : lil::rank_local(r, top_local)) {
      const auto& c = concepts[static_cast<size_t>(idx)];
      rep.local.push_back({c.phrase, c.start, c.end, r[static_cast<size_t>(idx)]});
    }
  }

  const auto ret = gil::mips_topk(encd.pooled, store, k);
  for (size_t i = 0; i < ret.indices.size(); ++i) {
    const auto& sc = store.meta[static_cast<size_t>(ret.indices[i])];
    rep.global.push_back(
        {sc.phrase, sc.source_sample, ret.indices[i], ret.scores[i], ret.probs[i]});
  }
  return rep;
}

AgreementResult agreement_f1(const model::Checkpoint& ck,
                             const gil::ConceptStore& store,
                             const std::vector<corpus::Sample>& samples) {
  check_compatible(ck, store);
  const int64_t n_classes = ck.params.encoder.n_classes();
  std::vector<int64_t> ref_lil, cand_lil, ref_gil, cand_gil;
  int64_t all_three = 0, n_lil = 0;
  for (const auto& s : samples) {
    const auto encd = enc::encode(s, ck.params.encoder);
    const auto [l_y, a] = enc::classify(encd.pooled, ck.params.encoder);
    const auto ret = gil::mips_topk(encd.pooled, store, ck.params.gil.w.size());
    const Tensor l_g = gil::gil_head(ret, store, ck.params.encoder.embedding,
                                     ck.params.gil);
    const int64_t c = num::argmax(l_g);
    ref_gil.push_back(a);
    cand_gil.push_back(c);

    if (encd.concept_reprs.rows() > 0) {
      const auto fwd = lil::local_dists(encd, ck.params.lil);
      const Tensor l_l = lil::lil_mix(fwd, ck.params.lil);
      const int64_t b = num::argmax(l_l);
      ref_lil.push_back(a);
      cand_lil.push_back(b);
      ++n_lil;
      if (a == b && a == c) ++all_three;
    }
  }

  AgreementResult out;
  out.n = static_cast<int64_t>(samples.size());
  out.n_lil = n_lil;
  out.lil_linear_f1 = macro_f1(ref_lil, cand_lil, n_classes);
  out.gil_linear_f1 = macro_f1(ref_gil, cand_gil, n_classes);
  int64_t eq = 0;
  for (size_t i = 0; i < ref_lil.size(); ++i)
    if (ref_lil[i] == cand_lil[i]) ++eq;
  out.lil_linear_rate = n_lil > 0 ? static_cast<double>(eq) / n_lil : 0.0;
  eq = 0;
  for (size_t i = 0; i < ref_gil.size(); ++i)
    if (ref_gil[i] == cand_gil[i]) ++eq;
  out.gil_linear_rate = out.n > 0 ? static_cast<double>(eq) / out.n : 0.0;
  out.all_three_rate = n_lil > 0 ? static_cast<double>(all_three) / n_lil : 0.0;
  return out;
}

namespace {

// mean-pooled bag-of-embeddings + linear head, trained from scratch per
// input variant (the sufficiency probe)
struct BoeClassifier {
  Tensor emb, w, b;

  BoeClassifier(int64_t vocab, int64_t dim, int64_t n_classes, Rng& rng) {
    emb = Tensor::zeros(vocab, dim);
    w = Tensor::zeros(dim, n_classes);
    b = Tensor::zeros(n_classes);
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int64_t i = 0; i < emb.size(); ++i) emb(i) = rng.uniform(-s, s);
    for (int64_t i = 0; i < w.size(); ++i) w(i) = rng.uniform(-s, s);
  }

  Tensor mean_of(const std::vector<int64_t>& doc) const {
    Tensor m = Tensor::zeros(emb.cols());
    if (doc.empty()) return m;
    for (int64_t id : doc)
      for (int64_t j = 0; j < emb.cols(); ++j) m(j) += emb(id, j);
    const double inv = 1.0 / static_cast<double>(doc.size());
    for (int64_t j = 0; j < m.size(); ++j) m(j) *= inv;
    return m;
  }

  int64_t predict(const std::vector<int64_t>& doc) const {
    return num::argmax(num::linear(w, b, mean_of(doc)));
  }
};

double train_eval_boe(const std::vector<std::vector<int64_t>>& train_docs,
                      const std::vector<int64_t>& train_labels,
                      const std::vector<std::vector<int64_t>>& test_docs,
                      const std::vector<int64_t>& test_labels, int64_t vocab,
                      int64_t n_classes, uint64_t seed) {
  constexpr int64_t kDim = 32, kEpochs = 40, kBatch = 32;
  constexpr double kLr = 0.01;
  Rng rng(seed);
  BoeClassifier clf(vocab, kDim, n_classes, rng);

  std::vector<Tensor*> params{&clf.emb, &clf.w, &clf.b};
  trainer::Adam opt(kLr, params);
  const int64_t n = static_cast<int64_t>(train_docs.size());
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int64_t epoch = 0; epoch < kEpochs; ++epoch) {
    rng.shuffle(order);
    for (int64_t beg = 0; beg < n; beg += kBatch) {
      const int64_t end = std::min(n, beg + kBatch);
      Tensor g_emb = Tensor::zeros(vocab, kDim);
      Tensor g_w = Tensor::zeros(kDim, n_classes);
      Tensor g_b = Tensor::zeros(n_classes);
      const double inv_b = 1.0 / static_cast<double>(end - beg);
      for (int64_t bi = beg; bi < end; ++bi) {
        const auto& doc = train_docs[static_cast<size_t>(order[bi])];
        const int64_t y = train_labels[static_cast<size_t>(order[bi])];
        const Tensor m = clf.mean_of(doc);
        const Tensor p = num::softmax(num::linear(clf.w, clf.b, m));
        for (int64_t c = 0; c < n_classes; ++c) {
          const double dl = (p(c) - (c == y ? 1.0 : 0.0)) * inv_b;
          g_b(c) += dl;
          for (int64_t j = 0; j < kDim; ++j) g_w(j, c) += m(j) * dl;
        }
        if (!doc.empty()) {
          const double inv_t = 1.0 / static_cast<double>(doc.size());
          for (int64_t id : doc)
            for (int64_t j = 0; j < kDim; ++j) {
              double dm = 0.0;
              for (int64_t c = 0; c < n_classes; ++c)
                dm += clf.w(j, c) * (p(c) - (c == y ? 1.0 : 0.0)) * inv_b;
              g_emb(id, j) += dm * inv_t;
            }
        }
      }
      opt.step(params, {g_emb, g_w, g_b});
    }
  }

  int64_t correct = 0;
  for (size_t i = 0; i < test_docs.size(); ++i)
    if (clf.predict(test_docs[i]) == test_labels[i]) ++correct;
  return test_docs.empty()
             ? 0.0
             : static_cast<double>(correct) / static_cast<double>(test_docs.size());
}

struct VariantDocs {
  std::vector<std::vector<int64_t>> full, lil, gil, random;
  std::vector<int64_t> labels;
};

VariantDocs build_variants(const model::Checkpoint& ck,
                           const gil::ConceptStore& store,
                           const std::vector<corpus::Sample>& samples,
                           double budget, Rng& rng) {
  double mean_len = 0.0;
  for (const auto& s : samples) mean_len += static_cast<double>(s.tokens.size());
  mean_len /= static_cast<double>(samples.size());
  const int64_t gil_budget =
      std::max<int64_t>(1, static_cast<int64_t>(budget * mean_len));

  VariantDocs out;
  for (const auto& s : samples) {
    const int64_t t_len = static_cast<int64_t>(s.token_ids.size());
    const auto rep = explain(s, ck, store, ck.params.gil.w.size(),
                             ck.config.top_local);
    out.labels.push_back(s.label);
    out.full.push_back(s.token_ids);

    const int64_t lil_budget =
        std::max<int64_t>(1, static_cast<int64_t>(budget * static_cast<double>(t_len)));
    std::vector<int64_t> lil_doc;
    for (const auto& item : rep.local) {
      for (int64_t i = item.start;
           i < item.end && static_cast<int64_t>(lil_doc.size()) < lil_budget; ++i)
        lil_doc.push_back(s.token_ids[static_cast<size_t>(i)]);
      if (static_cast<int64_t>(lil_doc.size()) >= lil_budget) break;
    }
    out.lil.push_back(lil_doc);

    std::vector<int64_t> gil_doc;
    for (const auto& item : rep.global) {
      const auto& ids = store.meta[static_cast<size_t>(item.store_row)].token_ids;
      for (int64_t id : ids) {
        if (static_cast<int64_t>(gil_doc.size()) >= gil_budget) break;
        gil_doc.push_back(id);
      }
      if (static_cast<int64_t>(gil_doc.size()) >= gil_budget) break;
    }
    out.gil.push_back(gil_doc);

    // random contiguous span, same token count as the LIL explanation
    const int64_t len = std::min<int64_t>(
        t_len, std::max<int64_t>(1, static_cast<int64_t>(lil_doc.size())));
    const int64_t start = static_cast<int64_t>(rng.below(static_cast<uint64_t>(t_len - len + 1)));
    out.random.emplace_back(s.token_ids.begin() + start,
                            s.token_ids.begin() + start + len);
  }
  return out;
}

}  // namespace

SufficiencyResult sufficiency_eval(const model::Checkpoint& ck,
                                   const gil::ConceptStore& store,
                                   const corpus::Dataset& train,
                                   const corpus::Dataset& test, double budget,
                                   uint64_t seed) {
  check_compatible(ck, store);
  if (train.samples.empty() || test.samples.empty())
    throw std::runtime_error("sufficiency_eval: empty explanation set");
  Rng rng(seed);
  const VariantDocs tr = build_variants(ck, store, train.samples, budget, rng);
  const VariantDocs te = build_variants(ck, store, test.samples, budget, rng);

  const int64_t vocab = ck.vocab.size();
  const int64_t n_classes = ck.params.encoder.n_classes();
  SufficiencyResult out;
  out.budget = budget;
  out.full_text_acc = train_eval_boe(tr.full, tr.labels, te.full, te.labels,
                                     vocab, n_classes, seed + 11);
  out.lil_acc = train_eval_boe(tr.lil, tr.labels, te.lil, te.labels, vocab,
                               n_classes, seed + 12);
  out.gil_acc = train_eval_boe(tr.gil, tr.labels, te.gil, te.labels, vocab,
                               n_classes, seed + 13);
  out.random_acc = train_eval_boe(tr.random, tr.labels, te.random, te.labels,
                                  vocab, n_classes, seed + 14);
  return out;
}

bool prune_span(const corpus::Sample& in, int64_t start, int64_t end,
                corpus::Sample& out) {
  int64_t next = 0;
  // returns pruned copy, or nullopt-equivalent via `ok`
  struct Pruner {
    int64_t s, e;
    int64_t* next;
    bool prune(const corpus::ParseNode& n, corpus::ParseNode& res) const {
      if (n.is_token) {
        if (n.start >= s && n.start < e) return false;
        res = n;
        res.start = *next;
        res.end = ++*next;
        return true;
      }
      corpus::ParseNode copy;
      copy.label = n.label;
      for (const auto& c : n.children) {
        corpus::ParseNode cc;
        if (prune(c, cc)) copy.children.push_back(std::move(cc));
      }
      if (copy.children.empty()) return false;
      copy.start = copy.children.front().start;
      copy.end = copy.children.back().end;
      res = std::move(copy);
      return true;
    }
  };
  Pruner pr{start, end, &next};
  corpus::ParseNode root;
  if (!pr.prune(in.parse, root)) return false;

  out.id = in.id + "#ablated";
  out.parse = std::move(root);
  out.tokens = corpus::leaf_tokens(out.parse);
  out.label = in.label;
  out.token_ids.clear();
  for (int64_t i = 0; i < static_cast<int64_t>(in.token_ids.size()); ++i)
    if (i < start || i >= end) out.token_ids.push_back(in.token_ids[static_cast<size_t>(i)]);
  return true;
}

AblationResult ablate_top_concept(const model::Checkpoint& ck,
                                  const std::vector<corpus::Sample>& samples,
                                  uint64_t seed) {
  Rng rng(seed);
  AblationResult out;
  int64_t full_c = 0, top_c = 0, rand_c = 0, pos = 0, nonzero = 0;
  for (const auto& s : samples) {
    const auto concepts = corpus::extract_concepts(s);
    // a random concept is drawn for every sample so the rng stream does not
    // depend on which samples get skipped
    const int64_t rand_idx =
        concepts.empty() ? 0 : static_cast<int64_t>(rng.below(concepts.size()));
    if (concepts.empty()) {
      ++out.skipped;
      continue;
    }

    const auto encd = enc::encode(s, ck.params.encoder);
    const auto [l_y, p_c] = enc::classify(encd.pooled, ck.params.encoder);
    const auto fwd = lil::local_dists(encd, ck.params.lil);
    std::vector<double> r(concepts.size());
    for (size_t j = 0; j < concepts.size(); ++j)
      r[j] = l_y(p_c) - fwd.s(static_cast<int64_t>(j), p_c);
    const int64_t top_idx = lil::rank_local(r, 1)[0];

    corpus::Sample ab_top, ab_rand;
    const bool ok_top = prune_span(s, concepts[static_cast<size_t>(top_idx)].start,
                                   concepts[static_cast<size_t>(top_idx)].end, ab_top);
    const bool ok_rand = prune_span(s, concepts[static_cast<size_t>(rand_idx)].start,
                                    concepts[static_cast<size_t>(rand_idx)].end, ab_rand);
    if (!ok_top || !ok_rand) {
      ++out.skipped;
      continue;
    }

    const bool full_ok = p_c == s.label;
    const auto et = enc::encode(ab_top, ck.params.encoder);
    const bool top_ok =
        enc::classify(et.pooled, ck.params.encoder).second == s.label;
    const auto er = enc::encode(ab_rand, ck.params.encoder);
    const bool rand_ok =
        enc::classify(er.pooled, ck.params.encoder).second == s.label;

    ++out.evaluated;
    full_c += full_ok;
    top_c += top_ok;
    rand_c += rand_ok;
    const int diff = (rand_ok ? 1 : 0) - (top_ok ? 1 : 0);  // top hurt more
    if (diff != 0) {
      ++nonzero;
      if (diff > 0) ++pos;
    }
  }
  if (out.evaluated > 0) {
    const double n = static_cast<double>(out.evaluated);
    out.acc_full = full_c / n;
    out.acc_ablated = top_c / n;
    out.acc_random_ablated = rand_c / n;
    out.delta = out.acc_full - out.acc_ablated;
    out.random_delta = out.acc_full - out.acc_random_ablated;
  }
  out.sign_test_p = sign_test_p_value(pos, nonzero);
  return out;
}

StabilityResult stability_check(
    const model::Checkpoint& ck, const gil::ConceptStore& store,
    const std::vector<std::pair<corpus::Sample, corpus::Sample>>& pairs) {
  StabilityResult out;
  const int64_t k = ck.params.gil.w.size();
  for (const auto& [a, b] : pairs) {
    const auto ra = explain(a, ck, store, k, ck.config.top_local);
    const auto rb = explain(b, ck, store, k, ck.config.top_local);
    StabilityPair sp;
    sp.id_a = a.id;
    sp.id_b = b.id;

    std::set<int64_t> ga, gb;
    for (const auto& it : ra.global) ga.insert(it.store_row);
    for (const auto& it : rb.global) gb.insert(it.store_row);
    std::set<std::string> la, lb;
    for (const auto& it : ra.local) la.insert(it.phrase);
    for (const auto& it : rb.local) lb.insert(it.phrase);

    auto jaccard = [](const auto& x, const auto& y) {
      if (x.empty() && y.empty()) return 1.0;
      int64_t inter = 0;
      for (const auto& v : x) inter += y.count(v) ? 1 : 0;
      const int64_t uni = static_cast<int64_t>(x.size() + y.size()) - inter;
      return static_cast<double>(inter) / static_cast<double>(uni);
    };
    sp.global_jaccard = jaccard(ga, gb);
    sp.local_jaccard = jaccard(la, lb);
    sp.identical_input = a.tokens == b.tokens;
    json ja = report_to_json(ra), jb = report_to_json(rb);
    ja.erase("id");  // compare content; pair sides carry distinct ids
    jb.erase("id");
    sp.reports_equal = ja.dump() == jb.dump();
    out.mean_global_jaccard += sp.global_jaccard;
    out.mean_local_jaccard += sp.local_jaccard;
    out.pairs.push_back(std::move(sp));
  }
  if (!out.pairs.empty()) {
    out.mean_global_jaccard /= static_cast<double>(out.pairs.size());
    out.mean_local_jaccard /= static_cast<double>(out.pairs.size());
  }
  return out;
}

double sign_test_p_value(int64_t k, int64_t n) {
  if (n <= 0) return 1.0;
  // sum C(n,i)/2^n for i in [k, n] via log-gamma
  double p = 0.0;
  for (int64_t i = k; i <= n; ++i) {
    const double logc = std::lgamma(static_cast<double>(n) + 1) -
                        std::lgamma(static_cast<double>(i) + 1) -
                        std::lgamma(static_cast<double>(n - i) + 1);
    p += std::exp(logc - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace phx::evalx
