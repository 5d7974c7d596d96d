// File-level orchestration shared by the CLI and the acceptance suite: every
// command's outputs are byte-reproducible given identical inputs, config and
// seed (wall-clock data goes to run.log only).
#ifndef PHX_PIPELINE_H
#define PHX_PIPELINE_H

#include <string>

#include <json.hpp>

#include "phx/config.h"
#include "phx/gil.h"
#include "phx/model.h"
#include "phx/trainer.h"

namespace phx::pipeline {

void run_gen_toy(const std::string& out_dir, int64_t n_train, int64_t n_test,
                 int64_t n_pairs, uint64_t seed);

// Writes best.ckpt(+.json), store.bin(+.meta.jsonl), label_manifest.json,
// metrics.jsonl and run.log under out_dir.
trainer::TrainReport run_train(const TrainConfig& config,
                               const std::string& train_path,
                               const std::string& dev_path,
                               const std::string& out_dir);

struct Run {
  model::Checkpoint ck;
  gil::ConceptStore store;
};

Run load_run(const std::string& checkpoint_path, const std::string& store_path);

corpus::Dataset load_for(const model::Checkpoint& ck, const std::string& path);

// One JSONL report per input record; returns the record count.
int64_t run_explain(const Run& run, const std::string& input_path,
                    const std::string& out_path, int64_t k, int64_t top_local);

nlohmann::json run_eval(const model::Checkpoint& ck, const std::string& data_path);
nlohmann::json run_agreement(const Run& run, const std::string& data_path);
nlohmann::json run_sufficiency(const Run& run, const std::string& train_path,
                               const std::string& test_path, double budget,
                               uint64_t seed);
nlohmann::json run_ablate(const model::Checkpoint& ck,
                          const std::string& data_path, uint64_t seed);
nlohmann::json run_stability(const Run& run, const std::string& pairs_path);

// Rebuilds the concept store from a checkpoint's embeddings over a dataset.
nlohmann::json run_index(const model::Checkpoint& ck,
                         const std::string& data_path,
                         const std::string& out_store_path, int64_t step);

void write_json(const nlohmann::json& j, const std::string& path);

}  // namespace phx::pipeline

#endif
