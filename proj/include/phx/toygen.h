// Synthetic sentiment benchmark: templated sentences with bracketed parses
// where exactly one injected phrase decides the label; the decisive span is
// recorded per record for evaluation oracles.
#ifndef PHX_TOYGEN_H
#define PHX_TOYGEN_H

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "phx/rng.h"

namespace phx::toygen {

// One dataset record: {"id","text","parse","label","decisive_span"}.
nlohmann::json make_record(int64_t index, const std::string& id_prefix,
                           Rng& rng);

std::vector<nlohmann::json> make_records(int64_t n, const std::string& id_prefix,
                                         uint64_t seed);

// Swaps one neutral token (a noun) for another; label and decisive phrase
// are untouched. Used to build stability pairs.
nlohmann::json perturb_neutral(const nlohmann::json& record, Rng& rng);

// Writes train.jsonl, test.jsonl and pairs.jsonl (n_pairs stability pairs
// drawn from the test records).
void write_toy_dataset(const std::string& out_dir, int64_t n_train,
                       int64_t n_test, int64_t n_pairs, uint64_t seed);

}  // namespace phx::toygen

#endif
