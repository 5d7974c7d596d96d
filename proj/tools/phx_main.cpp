// phx: phrase-concept text classifier with local and global explanations.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "phx/pipeline.h"

namespace {

using phx::TrainConfig;

std::string default_out_dir() {
  const char* env = std::getenv("PHX_OUT_DIR");
  return env ? env : "";
}

void add_config_flags(CLI::App* cmd, TrainConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "key = value config file");
  cmd->add_option("--alpha", cfg.alpha, "GIL loss weight");
  cmd->add_option("--beta", cfg.beta, "LIL loss weight");
  cmd->add_option("--k", cfg.k, "retrieved global concepts");
  cmd->add_option("--d", cfg.d, "hidden size");
  cmd->add_option("--n-layers", cfg.n_layers, "encoder blocks");
  cmd->add_option("--t-max", cfg.t_max, "max sequence length");
  cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "batch size");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--reindex-interval", cfg.reindex_interval_steps,
                  "store re-index interval in steps (0 = every epoch)");
  cmd->add_option("--top-local", cfg.top_local, "local concepts per report");
  cmd->add_option("--threads", cfg.threads, "worker thread cap");
  cmd->add_flag("--lowercase", cfg.lowercase, "lowercase all tokens");
}

void set_threads(int64_t n) {
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#else
  (void)n;
#endif
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    phx::pipeline::write_json(j, out_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phrase-concept text classifier with self-explanations"};
  app.require_subcommand(1);

  // gen-toy
  auto* gen = app.add_subcommand("gen-toy", "generate the synthetic benchmark");
  std::string gen_out = default_out_dir();
  int64_t gen_train = 2000, gen_test = 500, gen_pairs = 100;
  uint64_t gen_seed = 7;
  gen->add_option("--out-dir", gen_out, "output directory")
      ->required(default_out_dir().empty());
  gen->add_option("--train", gen_train, "training records");
  gen->add_option("--test", gen_test, "test records");
  gen->add_option("--pairs", gen_pairs, "stability pairs");
  gen->add_option("--seed", gen_seed, "RNG seed");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_train, tr_dev, tr_out = default_out_dir(), tr_config;
  TrainConfig tr_cfg;
  tr->add_option("--train", tr_train, "training JSONL")->required();
  tr->add_option("--dev", tr_dev, "dev JSONL")->required();
  tr->add_option("--out-dir", tr_out, "run directory")
      ->required(default_out_dir().empty());
  add_config_flags(tr, tr_cfg, tr_config);

  // index
  auto* ix = app.add_subcommand("index", "rebuild a concept store");
  std::string ix_ckpt, ix_data, ix_out;
  int64_t ix_step = 0;
  ix->add_option("--checkpoint", ix_ckpt)->required();
  ix->add_option("--data", ix_data, "dataset to index")->required();
  ix->add_option("--out", ix_out, "store file to write")->required();
  ix->add_option("--step", ix_step, "step counter stamped into the store");

  // explain
  auto* ex = app.add_subcommand("explain", "emit explanation reports");
  std::string ex_ckpt, ex_store, ex_input, ex_out;
  int64_t ex_k = -1, ex_top_local = -1;
  ex->add_option("--checkpoint", ex_ckpt)->required();
  ex->add_option("--store", ex_store)->required();
  ex->add_option("--input", ex_input, "input JSONL")->required();
  ex->add_option("--out", ex_out, "output JSONL")->required();
  ex->add_option("--k", ex_k, "global concepts (default: checkpoint config)");
  ex->add_option("--top-local", ex_top_local,
                 "local concepts (default: checkpoint config)");

  // eval
  auto* ev = app.add_subcommand("eval", "accuracy with per-class breakdown");
  std::string ev_ckpt, ev_data, ev_out;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--out", ev_out, "output JSON (default: stdout)");

  // eval-agreement
  auto* ag = app.add_subcommand("eval-agreement",
                                "GIL/LIL vs linear head agreement");
  std::string ag_ckpt, ag_store, ag_data, ag_out;
  ag->add_option("--checkpoint", ag_ckpt)->required();
  ag->add_option("--store", ag_store)->required();
  ag->add_option("--data", ag_data)->required();
  ag->add_option("--out", ag_out, "output JSON (default: stdout)");

  // eval-sufficiency
  auto* su = app.add_subcommand("eval-sufficiency",
                                "explanation-only classifier protocol");
  std::string su_ckpt, su_store, su_train, su_test, su_out;
  double su_budget = 0.2;
  uint64_t su_seed = 0;
  bool su_seed_set = false;
  su->add_option("--checkpoint", su_ckpt)->required();
  su->add_option("--store", su_store)->required();
  su->add_option("--train", su_train, "training JSONL")->required();
  su->add_option("--test", su_test, "test JSONL")->required();
  su->add_option("--budget", su_budget, "token budget fraction");
  su->add_option("--seed", su_seed, "RNG seed (default: checkpoint seed)")
      ->each([&](const std::string&) { su_seed_set = true; });
  su->add_option("--out", su_out, "output JSON (default: stdout)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "top-concept removal study");
  std::string ab_ckpt, ab_data, ab_out;
  uint64_t ab_seed = 0;
  bool ab_seed_set = false;
  ab->add_option("--checkpoint", ab_ckpt)->required();
  ab->add_option("--data", ab_data)->required();
  ab->add_option("--seed", ab_seed, "RNG seed (default: checkpoint seed)")
      ->each([&](const std::string&) { ab_seed_set = true; });
  ab->add_option("--out", ab_out, "output JSON (default: stdout)");

  // stability
  auto* st = app.add_subcommand("stability", "explanation overlap on pairs");
  std::string st_ckpt, st_store, st_pairs, st_out;
  st->add_option("--checkpoint", st_ckpt)->required();
  st->add_option("--store", st_store)->required();
  st->add_option("--pairs", st_pairs, "pairs JSONL: {\"a\":rec,\"b\":rec}")
      ->required();
  st->add_option("--out", st_out, "output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    namespace pl = phx::pipeline;
    if (*gen) {
      pl::run_gen_toy(gen_out, gen_train, gen_test, gen_pairs, gen_seed);
      std::cout << "wrote train.jsonl, test.jsonl, pairs.jsonl under " << gen_out
                << "\n";
    } else if (*tr) {
      // config file first, explicit flags override
      TrainConfig cfg = tr_cfg;
      if (!tr_config.empty()) {
        cfg = phx::load_config_file(tr_config);
        const auto set = [&](const std::string& name) {
          return tr->count(name) > 0;
        };
        if (set("--alpha")) cfg.alpha = tr_cfg.alpha;
        if (set("--beta")) cfg.beta = tr_cfg.beta;
        if (set("--k")) cfg.k = tr_cfg.k;
        if (set("--d")) cfg.d = tr_cfg.d;
        if (set("--n-layers")) cfg.n_layers = tr_cfg.n_layers;
        if (set("--t-max")) cfg.t_max = tr_cfg.t_max;
        if (set("--lr")) cfg.lr = tr_cfg.lr;
        if (set("--epochs")) cfg.epochs = tr_cfg.epochs;
        if (set("--batch-size")) cfg.batch_size = tr_cfg.batch_size;
        if (set("--seed")) cfg.seed = tr_cfg.seed;
        if (set("--reindex-interval"))
          cfg.reindex_interval_steps = tr_cfg.reindex_interval_steps;
        if (set("--top-local")) cfg.top_local = tr_cfg.top_local;
        if (set("--threads")) cfg.threads = tr_cfg.threads;
        if (set("--lowercase")) cfg.lowercase = tr_cfg.lowercase;
      }
      set_threads(cfg.threads);
      const auto report = pl::run_train(cfg, tr_train, tr_dev, tr_out);
      std::cout << "best dev accuracy " << report.best_dev_acc << " at epoch "
                << report.best_epoch << "; artifacts under " << tr_out << "\n";
    } else if (*ix) {
      const auto ck = phx::model::load_checkpoint(ix_ckpt);
      emit(pl::run_index(ck, ix_data, ix_out, ix_step), "");
    } else if (*ex) {
      const auto run = pl::load_run(ex_ckpt, ex_store);
      const int64_t k = ex_k > 0 ? ex_k : run.ck.config.k;
      const int64_t tl = ex_top_local > 0 ? ex_top_local : run.ck.config.top_local;
      const int64_t n = pl::run_explain(run, ex_input, ex_out, k, tl);
      std::cout << "wrote " << n << " reports to " << ex_out << "\n";
    } else if (*ev) {
      const auto ck = phx::model::load_checkpoint(ev_ckpt);
      emit(pl::run_eval(ck, ev_data), ev_out);
    } else if (*ag) {
      const auto run = pl::load_run(ag_ckpt, ag_store);
      emit(pl::run_agreement(run, ag_data), ag_out);
    } else if (*su) {
      const auto run = pl::load_run(su_ckpt, su_store);
      const uint64_t seed = su_seed_set ? su_seed : run.ck.config.seed;
      emit(pl::run_sufficiency(run, su_train, su_test, su_budget, seed), su_out);
    } else if (*ab) {
      const auto ck = phx::model::load_checkpoint(ab_ckpt);
      const uint64_t seed = ab_seed_set ? ab_seed : ck.config.seed;
      emit(pl::run_ablate(ck, ab_data, seed), ab_out);
    } else if (*st) {
      const auto run = pl::load_run(st_ckpt, st_store);
      emit(pl::run_stability(run, st_pairs), st_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
