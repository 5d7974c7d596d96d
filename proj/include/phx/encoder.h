// Small trainable encoder: token + learned positional embeddings, n pre-LN
// blocks of single-head self-attention and a 4x feed-forward, a prepended
// pooled-position token, and the linear classification head.
#ifndef PHX_ENCODER_H
#define PHX_ENCODER_H

#include <cstdint>
#include <utility>
#include <vector>

#include "phx/autodiff.h"
#include "phx/corpus.h"
#include "phx/rng.h"
#include "phx/tensor.h"

namespace phx::enc {

struct EncoderParams {
  Tensor embedding;   // V x D
  Tensor positional;  // (T_max + 1) x D, row 0 is the pooled slot
  struct Layer {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // D x D projections
    Tensor ln2_g, ln2_b;
    Tensor w1, c1;  // D x 4D
    Tensor w2, c2;  // 4D x D
  };
  std::vector<Layer> layers;
  Tensor w_y, b_y;  // D x C classifier head

  int64_t vocab_size() const { return embedding.rows(); }
  int64_t dim() const { return embedding.cols(); }
  int64_t t_max() const { return positional.rows() - 1; }
  int64_t n_classes() const { return w_y.cols(); }

  // declaration order; also the checkpoint tensor order
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

// Uniform(-1/sqrt(D), 1/sqrt(D)) weights, LN gains 1, biases 0.
EncoderParams init_encoder(int64_t vocab_size, int64_t dim, int64_t n_classes,
                           int64_t n_layers, int64_t t_max, Rng& rng);

struct EncodedSample {
  Tensor hidden;         // T x D final states of the real tokens
  Tensor pooled;         // D, final state of the pooled-position token
  Tensor concept_reprs;  // J x D span means over hidden
};

// Tape node ids for the encoder parameters.
struct EncNodes {
  int embedding, positional;
  struct Layer {
    int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, c1, w2,
        c2;
  };
  std::vector<Layer> layers;
  int w_y, b_y;
};

// Binds parameters as tape leaves; pid_start < 0 binds without ids.
EncNodes bind_encoder(Tape& tape, const EncoderParams& p, int pid_start);

// Final-layer states for [pool, w_1..w_T]; returns the (T+1) x D node.
int encoder_graph(Tape& tape, const EncNodes& n, const EncoderParams& p,
                  const std::vector<int64_t>& token_ids);

EncodedSample encode(const corpus::Sample& sample, const EncoderParams& p);

// l_Y = softmax(W_y^T relu(u_S) + b_y); predicted class breaks ties toward
// the lowest index.
std::pair<Tensor, int64_t> classify(const Tensor& u_s, const EncoderParams& p);

}  // namespace phx::enc

#endif
