// Joint optimization of L = alpha*L_G + beta*L_L + L_Y with periodic store
// re-indexing, best-dev checkpoint retention, and per-epoch metrics.
#ifndef PHX_TRAINER_H
#define PHX_TRAINER_H

#include <cstdint>
#include <vector>

#include "phx/config.h"
#include "phx/corpus.h"
#include "phx/model.h"

namespace phx::trainer {

class Adam {
 public:
  Adam(double lr, const std::vector<Tensor*>& params);
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double lr_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

std::vector<Tensor> zero_grads(const model::ModelParams& p);

struct BatchLoss {
  double joint = 0, l_y = 0, l_l = 0, l_g = 0;  // means over the batch
};

// Mean joint loss over a batch; when `grads` is non-null the mean gradient
// is accumulated into it. Per-sample work fans out over `threads`, with the
// reduction in sample order so results do not depend on the thread count.
// `frozen` (optional, per-sample) pins the retrieved concepts; `preds`
// (optional) receives argmax(l_Y) per sample.
BatchLoss joint_loss(const std::vector<const corpus::Sample*>& batch,
                     const model::ModelParams& params,
                     const gil::ConceptStore& store, double alpha, double beta,
                     std::vector<Tensor>* grads = nullptr,
                     const std::vector<gil::Retrieval>* frozen = nullptr,
                     int64_t threads = 1,
                     std::vector<int64_t>* preds = nullptr);

struct EpochMetrics {
  int64_t epoch = 0;
  double train_loss = 0, train_l_y = 0, train_l_l = 0, train_l_g = 0;
  double dev_loss = 0, dev_l_y = 0, dev_l_l = 0, dev_l_g = 0;
  double dev_acc = 0;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  double steps_per_sec = 0;  // wall clock; log-file only, not metrics
  int64_t total_steps = 0;
  int64_t best_epoch = -1;
  double best_dev_acc = 0;
};

struct TrainResult {
  model::ModelParams best_params;
  gil::ConceptStore best_store;  // re-indexed from best_params embeddings
  corpus::Vocab vocab;
  corpus::LabelManifest labels;
  TrainReport report;
};

TrainResult train(const TrainConfig& config, const corpus::Dataset& train_set,
                  const corpus::Dataset& dev_set);

struct ClassStats {
  int64_t total = 0, correct = 0;
};

struct EvalResult {
  double accuracy = 0;
  std::vector<ClassStats> per_class;
};

EvalResult evaluate(const model::Checkpoint& ck,
                    const std::vector<corpus::Sample>& samples);

}  // namespace phx::trainer

#endif
