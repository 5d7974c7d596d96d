// Full model state (encoder + LIL + GIL heads), the joint training graph,
// and checkpoint persistence.
#ifndef PHX_MODEL_H
#define PHX_MODEL_H

#include <string>
#include <vector>

#include "phx/autodiff.h"
#include "phx/config.h"
#include "phx/corpus.h"
#include "phx/encoder.h"
#include "phx/gil.h"
#include "phx/lil.h"

namespace phx::model {

struct ModelParams {
  enc::EncoderParams encoder;
  lil::LilParams lil;
  gil::GilParams gil;

  // declaration order == parameter id order == checkpoint order
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

ModelParams init_model(int64_t vocab_size, int64_t dim, int64_t n_classes,
                       int64_t n_layers, int64_t t_max, int64_t k,
                       uint64_t seed);

// Shapes only, zero-filled (checkpoint loading target).
ModelParams make_model_shapes(int64_t vocab_size, int64_t dim,
                              int64_t n_classes, int64_t n_layers,
                              int64_t t_max, int64_t k);

// Per-sample joint graph. Node ids are -1 for absent parts (J = 0 has no
// LIL term). Retrieval is computed from the store unless `frozen` is given
// (gradient checks freeze the retrieved set).
struct SampleGraph {
  int pooled = -1;  // 1 x D
  int l_y = -1, loss_y = -1;
  int t_mat = -1, s_mat = -1, l_l = -1, loss_l = -1;
  int l_g = -1, loss_g = -1;
  int joint = -1;
  gil::Retrieval retrieval;
  int64_t j_count = 0;
};

SampleGraph joint_graph(Tape& tape, const ModelParams& params,
                        const corpus::Sample& sample,
                        const gil::ConceptStore& store, double alpha,
                        double beta, const gil::Retrieval* frozen = nullptr);

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
  corpus::Vocab vocab;
  corpus::LabelManifest labels;
};

// Binary tensors + JSON sidecar (<path>.json) with config, label manifest
// and vocabulary.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainConfig& config, const corpus::Vocab& vocab,
                     const corpus::LabelManifest& labels);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace phx::model

#endif
