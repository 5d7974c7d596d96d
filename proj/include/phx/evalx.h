// Explanation reports and the evaluation protocols: layer agreement,
// sufficiency (explanation-only classifier), top-concept ablation, and
// stability under small input perturbations.
#ifndef PHX_EVALX_H
#define PHX_EVALX_H

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "phx/corpus.h"
#include "phx/gil.h"
#include "phx/model.h"

namespace phx::evalx {

struct LocalItem {
  std::string phrase;
  int64_t start = 0, end = 0;
  double r = 0;
};

struct GlobalItem {
  std::string phrase;
  std::string source;
  int64_t store_row = 0;
  double score = 0;  // cosine d
  double prob = 0;   // p(q|x)
};

struct ExplanationReport {
  std::string id, text, gold, pred;
  std::vector<LocalItem> local;    // descending r, at most top_local
  std::vector<GlobalItem> global;  // descending d, exactly K
};

nlohmann::json report_to_json(const ExplanationReport& r);

ExplanationReport explain(const corpus::Sample& sample,
                          const model::Checkpoint& ck,
                          const gil::ConceptStore& store, int64_t k,
                          int64_t top_local);

struct AgreementResult {
  double lil_linear_f1 = 0, gil_linear_f1 = 0;
  double lil_linear_rate = 0, gil_linear_rate = 0, all_three_rate = 0;
  int64_t n = 0, n_lil = 0;  // n_lil excludes J = 0 samples
};

// Pairwise agreement of argmax(l_L) and argmax(l_G) against argmax(l_Y),
// reported as macro-averaged F1 (linear argmax as reference) and as raw
// agreement rates.
AgreementResult agreement_f1(const model::Checkpoint& ck,
                             const gil::ConceptStore& store,
                             const std::vector<corpus::Sample>& samples);

struct SufficiencyResult {
  double full_text_acc = 0, lil_acc = 0, gil_acc = 0, random_acc = 0;
  double budget = 0;
};

// FRESH-style protocol: a fresh bag-of-embeddings classifier is trained on
// (full text | top-LIL phrases | top-GIL phrases | random spans), each
// truncated at the token budget, and scored on the test split.
SufficiencyResult sufficiency_eval(const model::Checkpoint& ck,
                                   const gil::ConceptStore& store,
                                   const corpus::Dataset& train,
                                   const corpus::Dataset& test, double budget,
                                   uint64_t seed);

struct AblationResult {
  double acc_full = 0, acc_ablated = 0, delta = 0;
  double acc_random_ablated = 0, random_delta = 0;
  int64_t evaluated = 0, skipped = 0;
  double sign_test_p = 1.0;  // one-sided, top-drop > random-drop
};

AblationResult ablate_top_concept(const model::Checkpoint& ck,
                                  const std::vector<corpus::Sample>& samples,
                                  uint64_t seed);

// Tokens of [start,end) removed, empty nodes dropped, spans renumbered.
// Returns false when no tokens survive.
bool prune_span(const corpus::Sample& in, int64_t start, int64_t end,
                corpus::Sample& out);

struct StabilityPair {
  std::string id_a, id_b;
  double global_jaccard = 0;  // over top-K store rows
  double local_jaccard = 0;   // over top-k phrase strings
  bool identical_input = false;
  bool reports_equal = false;
};

struct StabilityResult {
  std::vector<StabilityPair> pairs;
  double mean_global_jaccard = 0, mean_local_jaccard = 0;
};

StabilityResult stability_check(
    const model::Checkpoint& ck, const gil::ConceptStore& store,
    const std::vector<std::pair<corpus::Sample, corpus::Sample>>& pairs);

// One-sided exact sign test: P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p_value(int64_t k, int64_t n);

}  // namespace phx::evalx

#endif
