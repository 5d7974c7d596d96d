#include "phx/gil.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "phx/kernels.h"
#include "phx/numerics.h"

namespace phx::gil {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'H', 'X', 'S', 'T', 'O', 'R', 'E'};
constexpr uint32_t kVersion = 1;

// sum-then-scale, same accumulation order as the training-graph embedding
// mean so reindex stays bit-identical to the tape values
void mean_rows(const Tensor& embedding, const std::vector<int64_t>& ids,
               double* out) {
  const int64_t d = embedding.cols();
  for (int64_t j = 0; j < d; ++j) out[j] = 0.0;
  for (int64_t id : ids) {
    if (id < 0 || id >= embedding.rows())
      throw std::runtime_error("concept store: token id " + std::to_string(id) +
                               " outside embedding table (vocab mismatch)");
    for (int64_t j = 0; j < d; ++j) out[j] += embedding(id, j);
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (int64_t j = 0; j < d; ++j) out[j] *= inv;
}

double norm_of(const double* v, int64_t d) {
  double s = 0.0;
  for (int64_t j = 0; j < d; ++j) s += v[j] * v[j];
  return std::sqrt(s);
}

}  // namespace

GilParams init_gil(int64_t dim, int64_t n_classes, int64_t k, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  GilParams p;
  p.w_u = Tensor::zeros(dim, n_classes);
  p.b_u = Tensor::zeros(n_classes);
  p.w = Tensor::zeros(k);
  for (int64_t i = 0; i < p.w_u.size(); ++i) p.w_u(i) = rng.uniform(-s, s);
  for (int64_t i = 0; i < k; ++i) p.w(i) = rng.uniform(-s, s);
  return p;
}

ConceptStore build_store(const std::vector<corpus::Sample>& train,
                         const Tensor& embedding, int64_t step) {
  if (train.empty()) throw std::runtime_error("build_store: empty training set");
  const int64_t d = embedding.cols();

  ConceptStore store;
  store.built_at_step = step;
  std::unordered_set<std::string> seen;
  std::vector<double> rows;
  std::vector<double> q(static_cast<size_t>(d));
  for (const corpus::Sample& s : train) {
    for (const corpus::Concept& c : corpus::extract_concepts(s)) {
      if (!seen.insert(c.phrase).second) continue;
      StoredConcept sc{c.phrase, c.source_sample, c.start, c.end, c.node_label,
                       {s.token_ids.begin() + c.start, s.token_ids.begin() + c.end}};
      mean_rows(embedding, sc.token_ids, q.data());
      const double n = norm_of(q.data(), d);
      if (n == 0.0) {
        ++store.dropped_zero_rows;
        continue;
      }
      rows.insert(rows.end(), q.begin(), q.end());
      store.norms.push_back(n);
      store.meta.push_back(std::move(sc));
    }
  }
  const int64_t n_q = static_cast<int64_t>(store.meta.size());
  store.vectors = Tensor::zeros(n_q, d);
  std::copy(rows.begin(), rows.end(), store.vectors.data());
  return store;
}

void reindex(ConceptStore& store, const Tensor& embedding, int64_t step) {
  const int64_t d = embedding.cols();
  if (store.dim() != d)
    throw std::runtime_error("reindex: embedding dimension mismatch");
  for (int64_t r = 0; r < store.size(); ++r) {
    double* row = store.vectors.data() + r * d;
    mean_rows(embedding, store.meta[static_cast<size_t>(r)].token_ids, row);
    const double n = norm_of(row, d);
    if (n == 0.0)
      throw std::runtime_error("reindex: store row " + std::to_string(r) +
                               " became zero-norm");
    store.norms[static_cast<size_t>(r)] = n;
  }
  store.built_at_step = step;
}

Retrieval mips_topk(const Tensor& query, const ConceptStore& store, int64_t k) {
  const int64_t n = store.size(), d = store.dim();
  if (query.size() != d)
    throw std::invalid_argument("mips_topk: query dimension mismatch");
  if (k < 1 || k > n)
    throw std::invalid_argument("mips_topk: K=" + std::to_string(k) +
                                " out of range for store size " + std::to_string(n));
  const double qnorm = norm_of(query.data(), d);
  if (qnorm == 0.0)
    throw std::runtime_error("mips_topk: zero-norm query (degenerate pooled representation)");

  std::vector<double> scores(static_cast<size_t>(n));
  kern::cosine_scores(query.data(), qnorm, store.vectors.data(),
                      store.norms.data(), scores.data(), n, d);

  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int64_t a, int64_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);

  // retrieval distribution: softmax of the cosine scores over the whole store
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double denom = 0.0;
  for (double s : scores) denom += std::exp(s - mx);

  Retrieval out;
  out.indices.assign(idx.begin(), idx.begin() + k);
  for (int64_t i : out.indices) {
    out.scores.push_back(scores[static_cast<size_t>(i)]);
    out.probs.push_back(std::exp(scores[static_cast<size_t>(i)] - mx) / denom);
  }
  return out;
}

Tensor gil_head(const Retrieval& retrieval, const ConceptStore& store,
                const Tensor& embedding, const GilParams& p) {
  const int64_t k = p.w.size();
  if (static_cast<int64_t>(retrieval.indices.size()) != k)
    throw std::invalid_argument("gil_head: retrieval size != K");
  const int64_t d = embedding.cols();
  Tensor z = Tensor::zeros(d);
  std::vector<double> q(static_cast<size_t>(d));
  for (int64_t i = 0; i < k; ++i) {
    const auto& sc = store.meta[static_cast<size_t>(retrieval.indices[i])];
    mean_rows(embedding, sc.token_ids, q.data());
    for (int64_t j = 0; j < d; ++j) z(j) += p.w(i) * q[j];
  }
  return num::softmax(num::linear(p.w_u, p.b_u, num::relu(z)));
}

std::pair<Tensor, double> gil_loss(const Retrieval& retrieval,
                                   const ConceptStore& store,
                                   const Tensor& embedding, const GilParams& p,
                                   int64_t y) {
  Tensor l_g = gil_head(retrieval, store, embedding, p);
  const double loss = num::cross_entropy(l_g, y);
  return {std::move(l_g), loss};
}

void save_store(const ConceptStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write store file: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t ver = kVersion;
  out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  const int64_t hdr[3] = {store.size(), store.dim(), store.built_at_step};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  out.write(reinterpret_cast<const char*>(store.vectors.data()),
            static_cast<std::streamsize>(sizeof(double) * store.vectors.size()));
  out.write(reinterpret_cast<const char*>(store.norms.data()),
            static_cast<std::streamsize>(sizeof(double) * store.norms.size()));
  if (!out) throw std::runtime_error("short write to store file: " + path);

  std::ofstream meta(path + ".meta.jsonl");
  for (const StoredConcept& sc : store.meta) {
    json rec{{"phrase", sc.phrase},
             {"source", sc.source_sample},
             {"span", {sc.start, sc.end}},
             {"label", sc.node_label}};
    meta << rec.dump() << "\n";
  }
}

ConceptStore load_store(const std::string& path, const corpus::Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open store file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a concept store file: " + path);
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kVersion)
    throw std::runtime_error("unsupported store version " + std::to_string(ver));
  int64_t hdr[3];
  in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!in || hdr[0] < 0 || hdr[1] <= 0)
    throw std::runtime_error("corrupt store header: " + path);

  ConceptStore store;
  store.built_at_step = hdr[2];
  store.vectors = Tensor::zeros(hdr[0], hdr[1]);
  store.norms.resize(static_cast<size_t>(hdr[0]));
  in.read(reinterpret_cast<char*>(store.vectors.data()),
          static_cast<std::streamsize>(sizeof(double) * store.vectors.size()));
  in.read(reinterpret_cast<char*>(store.norms.data()),
          static_cast<std::streamsize>(sizeof(double) * store.norms.size()));
  if (!in) throw std::runtime_error("truncated store file: " + path);
  ensure_finite(store.vectors, "load_store");

  std::ifstream meta(path + ".meta.jsonl");
  if (!meta)
    throw std::runtime_error("missing store metadata sidecar: " + path + ".meta.jsonl");
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    StoredConcept sc;
    sc.phrase = rec.at("phrase").get<std::string>();
    sc.source_sample = rec.at("source").get<std::string>();
    sc.start = rec.at("span").at(0).get<int64_t>();
    sc.end = rec.at("span").at(1).get<int64_t>();
    sc.node_label = rec.at("label").get<std::string>();
    std::istringstream words(sc.phrase);
    std::string w;
    while (words >> w) sc.token_ids.push_back(vocab.id_of(w));
    store.meta.push_back(std::move(sc));
  }
  if (static_cast<int64_t>(store.meta.size()) != store.size())
    throw std::runtime_error("store metadata row count mismatch: " + path);
  return store;
}

}  // namespace phx::gil
