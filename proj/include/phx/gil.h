// Global interpretability: concept store over all training phrases, exact
// top-K cosine retrieval, the retrieval distribution, and the GIL loss head.
#ifndef PHX_GIL_H
#define PHX_GIL_H

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phx/corpus.h"
#include "phx/rng.h"
#include "phx/tensor.h"

namespace phx::gil {

struct StoredConcept {
  std::string phrase;
  std::string source_sample;
  int64_t start = 0, end = 0;
  std::string node_label;
  std::vector<int64_t> token_ids;  // resolved once; rows are re-embedded from these
};

struct ConceptStore {
  Tensor vectors;             // N_Q x D mean-pooled embeddings
  std::vector<double> norms;  // cached Euclidean norms, all > 0
  std::vector<StoredConcept> meta;
  int64_t built_at_step = 0;
  int64_t dropped_zero_rows = 0;

  int64_t size() const { return vectors.rows(); }
  int64_t dim() const { return vectors.cols(); }
};

struct GilParams {
  Tensor w_u, b_u;  // D x C head
  Tensor w;         // K learnable aggregation weights

  std::vector<Tensor*> tensors() { return {&w_u, &b_u, &w}; }
  std::vector<const Tensor*> tensors() const { return {&w_u, &b_u, &w}; }
};

GilParams init_gil(int64_t dim, int64_t n_classes, int64_t k, Rng& rng);

// One store row per distinct training phrase (exact-string dedup, first
// occurrence order); q = mean of the phrase's embedding rows. Zero-norm
// rows are dropped and counted.
ConceptStore build_store(const std::vector<corpus::Sample>& train,
                         const Tensor& embedding, int64_t step = 0);

// Recomputes all rows and norms from the current embeddings; metadata is
// untouched. Bit-identical to a fresh build on the same embeddings.
void reindex(ConceptStore& store, const Tensor& embedding, int64_t step);

struct Retrieval {
  std::vector<int64_t> indices;  // K rows, scores descending, ties by row
  std::vector<double> scores;    // cosine similarities
  std::vector<double> probs;     // softmax over ALL rows, restricted to K
};

// Exact top-K by cosine similarity; throws on a zero-norm query or K > N_Q.
Retrieval mips_topk(const Tensor& query, const ConceptStore& store, int64_t k);

// l_G = softmax(W_u^T relu(sum_k w_k q_k) + b_u); q_k re-embedded live from
// `embedding` so gradients reach the retrieved rows.
Tensor gil_head(const Retrieval& retrieval, const ConceptStore& store,
                const Tensor& embedding, const GilParams& p);

// (l_G, L_G)
std::pair<Tensor, double> gil_loss(const Retrieval& retrieval,
                                   const ConceptStore& store,
                                   const Tensor& embedding, const GilParams& p,
                                   int64_t y);

// Binary store file + JSONL metadata sidecar (<path>.meta.jsonl).
void save_store(const ConceptStore& store, const std::string& path);
ConceptStore load_store(const std::string& path, const corpus::Vocab& vocab);

}  // namespace phx::gil

#endif
