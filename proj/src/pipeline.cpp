#include "phx/pipeline.h"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "phx/evalx.h"
#include "phx/toygen.h"

namespace phx::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void run_gen_toy(const std::string& out_dir, int64_t n_train, int64_t n_test,
                 int64_t n_pairs, uint64_t seed) {
  toygen::write_toy_dataset(out_dir, n_train, n_test, n_pairs, seed);
}

trainer::TrainReport run_train(const TrainConfig& config,
                               const std::string& train_path,
                               const std::string& dev_path,
                               const std::string& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  const corpus::Dataset train_set =
      corpus::load_dataset(train_path, nullptr, nullptr, config.lowercase);
  const corpus::Dataset dev_set = corpus::load_dataset(
      dev_path, &train_set.vocab, &train_set.labels, config.lowercase);

  trainer::TrainResult res = trainer::train(config, train_set, dev_set);

  std::ofstream metrics(out_dir + "/metrics.jsonl");
  if (!metrics) throw std::runtime_error("cannot write metrics.jsonl");
  for (const auto& em : res.report.epochs) {
    metrics << json{{"epoch", em.epoch},
                    {"train_loss", em.train_loss},
                    {"train_l_y", em.train_l_y},
                    {"train_l_l", em.train_l_l},
                    {"train_l_g", em.train_l_g},
                    {"dev_loss", em.dev_loss},
                    {"dev_l_y", em.dev_l_y},
                    {"dev_l_l", em.dev_l_l},
                    {"dev_l_g", em.dev_l_g},
                    {"dev_acc", em.dev_acc}}
                   .dump()
            << "\n";
  }

  model::save_checkpoint(out_dir + "/best.ckpt", res.best_params, config,
                         res.vocab, res.labels);
  gil::save_store(res.best_store, out_dir + "/store.bin");

  json manifest = json::object();
  for (const auto& [name, idx] : res.labels) manifest[name] = idx;
  write_json(manifest, out_dir + "/label_manifest.json");

  const auto now = std::chrono::system_clock::now();
  std::ofstream log(out_dir + "/run.log");
  log << "finished_unix_time=" << std::chrono::duration_cast<std::chrono::seconds>(
             now.time_since_epoch()).count()
      << "\nsteps=" << res.report.total_steps
      << "\nsteps_per_sec=" << res.report.steps_per_sec
      << "\nbest_epoch=" << res.report.best_epoch
      << "\nbest_dev_acc=" << res.report.best_dev_acc << "\n";
  return res.report;
}

Run load_run(const std::string& checkpoint_path, const std::string& store_path) {
  Run run;
  run.ck = model::load_checkpoint(checkpoint_path);
  run.store = gil::load_store(store_path, run.ck.vocab);
  return run;
}

corpus::Dataset load_for(const model::Checkpoint& ck, const std::string& path) {
  return corpus::load_dataset(path, &ck.vocab, &ck.labels, ck.config.lowercase);
}

int64_t run_explain(const Run& run, const std::string& input_path,
                    const std::string& out_path, int64_t k, int64_t top_local) {
  const corpus::Dataset ds = load_for(run.ck, input_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (const auto& s : ds.samples) {
    const auto rep = evalx::explain(s, run.ck, run.store, k, top_local);
    out << evalx::report_to_json(rep).dump() << "\n";
  }
  return static_cast<int64_t>(ds.samples.size());
}

json run_eval(const model::Checkpoint& ck, const std::string& data_path) {
  const corpus::Dataset ds = load_for(ck, data_path);
  const trainer::EvalResult res = trainer::evaluate(ck, ds.samples);
  json per_class = json::object();
  for (const auto& [name, idx] : ck.labels) {
    const auto& cs = res.per_class[static_cast<size_t>(idx)];
    per_class[name] = {{"total", cs.total},
                       {"correct", cs.correct},
                       {"recall", cs.total > 0 ? static_cast<double>(cs.correct) /
                                                     static_cast<double>(cs.total)
                                               : 0.0}};
  }
  return json{{"accuracy", res.accuracy},
              {"n", ds.samples.size()},
              {"per_class", per_class},
              {"config", config_to_json(ck.config)}};
}

json run_agreement(const Run& run, const std::string& data_path) {
  const corpus::Dataset ds = load_for(run.ck, data_path);
  const auto res = evalx::agreement_f1(run.ck, run.store, ds.samples);
  return json{{"lil_linear_f1", res.lil_linear_f1},
              {"gil_linear_f1", res.gil_linear_f1},
              {"all_three_f1", std::min(res.lil_linear_f1, res.gil_linear_f1)},
              {"lil_linear_rate", res.lil_linear_rate},
              {"gil_linear_rate", res.gil_linear_rate},
              {"all_three_rate", res.all_three_rate},
              {"n", res.n},
              {"n_lil", res.n_lil},
              {"config", config_to_json(run.ck.config)}};
}

json run_sufficiency(const Run& run, const std::string& train_path,
                     const std::string& test_path, double budget,
                     uint64_t seed) {
  const corpus::Dataset train = load_for(run.ck, train_path);
  const corpus::Dataset test = load_for(run.ck, test_path);
  const auto res =
      evalx::sufficiency_eval(run.ck, run.store, train, test, budget, seed);
  return json{{"full_text_acc", res.full_text_acc},
              {"lil_acc", res.lil_acc},
              {"gil_acc", res.gil_acc},
              {"random_acc", res.random_acc},
              {"budget", res.budget},
              {"seed", seed},
              {"config", config_to_json(run.ck.config)}};
}

json run_ablate(const model::Checkpoint& ck, const std::string& data_path,
                uint64_t seed) {
  const corpus::Dataset ds = load_for(ck, data_path);
  const auto res = evalx::ablate_top_concept(ck, ds.samples, seed);
  return json{{"acc_full", res.acc_full},
              {"acc_ablated", res.acc_ablated},
              {"delta", res.delta},
              {"acc_random_ablated", res.acc_random_ablated},
              {"random_delta", res.random_delta},
              {"evaluated", res.evaluated},
              {"skipped", res.skipped},
              {"sign_test_p", res.sign_test_p},
              {"seed", seed},
              {"config", config_to_json(ck.config)}};
}

json run_stability(const Run& run, const std::string& pairs_path) {
  std::ifstream in(pairs_path);
  if (!in) throw std::runtime_error("cannot open pairs file: " + pairs_path);

  // each line: {"a": <record>, "b": <record>}
  std::vector<std::pair<corpus::Sample, corpus::Sample>> pairs;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = " (pairs line " + std::to_string(lineno) + ")";
    json rec = json::parse(line);
    if (!rec.contains("a") || !rec.contains("b"))
      throw std::runtime_error("expected fields a and b" + at);
    try {
      auto [a, la] = corpus::sample_from_json(rec["a"], run.ck.config.lowercase,
                                              std::to_string(lineno) + "a");
      auto [b, lb] = corpus::sample_from_json(rec["b"], run.ck.config.lowercase,
                                              std::to_string(lineno) + "b");
      const auto bind = [&](corpus::Sample& s, const std::string& label) {
        auto it = run.ck.labels.find(label);
        if (it == run.ck.labels.end())
          throw std::runtime_error("unknown label '" + label + "'");
        s.label = it->second;
        corpus::resolve_token_ids(s, run.ck.vocab);
      };
      bind(a, la);
      bind(b, lb);
      pairs.emplace_back(std::move(a), std::move(b));
    } catch (const std::exception& e) {
      throw std::runtime_error(e.what() + at);
    }
  }
  const auto res = evalx::stability_check(run.ck, run.store, pairs);

  json out_pairs = json::array();
  for (const auto& p : res.pairs)
    out_pairs.push_back({{"id_a", p.id_a},
                         {"id_b", p.id_b},
                         {"global_jaccard", p.global_jaccard},
                         {"local_jaccard", p.local_jaccard},
                         {"identical_input", p.identical_input},
                         {"reports_equal", p.reports_equal}});
  return json{{"mean_global_jaccard", res.mean_global_jaccard},
              {"mean_local_jaccard", res.mean_local_jaccard},
              {"n_pairs", res.pairs.size()},
              {"pairs", out_pairs},
              {"config", config_to_json(run.ck.config)}};
}

json run_index(const model::Checkpoint& ck, const std::string& data_path,
               const std::string& out_store_path, int64_t step) {
  const corpus::Dataset ds = load_for(ck, data_path);
  const gil::ConceptStore store =
      gil::build_store(ds.samples, ck.params.encoder.embedding, step);
  gil::save_store(store, out_store_path);
  return json{{"n_concepts", store.size()},
              {"dim", store.dim()},
              {"dropped_zero_rows", store.dropped_zero_rows},
              {"built_at_step", store.built_at_step}};
}

}  // namespace phx::pipeline
