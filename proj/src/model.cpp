#include "phx/model.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "phx/numerics.h"

namespace phx::model {

using nlohmann::json;

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out = encoder.tensors();
  for (Tensor* t : lil.tensors()) out.push_back(t);
  for (Tensor* t : gil.tensors()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

ModelParams init_model(int64_t vocab_size, int64_t dim, int64_t n_classes,
                       int64_t n_layers, int64_t t_max, int64_t k,
                       uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.encoder = enc::init_encoder(vocab_size, dim, n_classes, n_layers, t_max, rng);
  p.lil = lil::init_lil(dim, n_classes, rng);
  p.gil = gil::init_gil(dim, n_classes, k, rng);
  return p;
}

ModelParams make_model_shapes(int64_t vocab_size, int64_t dim,
                              int64_t n_classes, int64_t n_layers,
                              int64_t t_max, int64_t k) {
  Rng rng(0);
  ModelParams p = init_model(vocab_size, dim, n_classes, n_layers, t_max, k, 0);
  for (Tensor* t : p.tensors()) t->fill(0.0);
  return p;
}

SampleGraph joint_graph(Tape& tape, const ModelParams& params,
                        const corpus::Sample& sample,
                        const gil::ConceptStore& store, double alpha,
                        double beta, const gil::Retrieval* frozen) {
  const enc::EncNodes en = bind_encoder(tape, params.encoder, 0);
  int pid = static_cast<int>(params.encoder.tensors().size());
  const int n_wv = tape.param(&params.lil.w_v, pid++);
  const int n_bv = tape.param(&params.lil.b_v, pid++);
  const int n_scorer = tape.param(&params.lil.scorer, pid++);
  const int n_wu = tape.param(&params.gil.w_u, pid++);
  const int n_bu = tape.param(&params.gil.b_u, pid++);
  const int n_wk = tape.param(&params.gil.w, pid++);

  SampleGraph g;
  const int x = encoder_graph(tape, en, params.encoder, sample.token_ids);
  g.pooled = tape.slice_rows(x, 0, 1);
  const int relu_us = tape.relu(g.pooled);
  g.l_y = tape.softmax_rows(tape.add_rowvec(tape.matmul(relu_us, en.w_y), en.b_y));
  g.loss_y = tape.cross_entropy(g.l_y, sample.label);

  const auto concepts = corpus::extract_concepts(sample);
  g.j_count = static_cast<int64_t>(concepts.size());
  if (g.j_count > 0) {
    std::vector<std::pair<int64_t, int64_t>> spans;
    spans.reserve(concepts.size());
    for (const auto& c : concepts) spans.emplace_back(c.start, c.end);
    const int u_mat = tape.span_means(x, std::move(spans), /*off=*/1);
    g.t_mat = tape.sub_rowvec(tape.relu(u_mat), relu_us);
    g.s_mat = tape.softmax_rows(tape.add_rowvec(tape.matmul(g.t_mat, n_wv), n_bv));
    const int w_logits = tape.matmul(g.t_mat, n_scorer);  // J x 1
    const int w_row = tape.softmax_rows(tape.reshape(w_logits, 1, g.j_count));
    g.l_l = tape.matmul(w_row, g.s_mat);
    g.loss_l = tape.cross_entropy(g.l_l, sample.label);
  }

  const int64_t k = params.gil.w.size();
  g.retrieval = frozen ? *frozen : gil::mips_topk(tape.val(g.pooled), store, k);
  std::vector<int> q_rows;
  q_rows.reserve(static_cast<size_t>(k));
  for (int64_t idx : g.retrieval.indices)
    q_rows.push_back(tape.rows_mean_gather(
        en.embedding, store.meta[static_cast<size_t>(idx)].token_ids));
  const int q_mat = tape.concat_rows(q_rows);
  const int z = tape.matmul(tape.reshape(n_wk, 1, k), q_mat);
  g.l_g = tape.softmax_rows(tape.add_rowvec(tape.matmul(tape.relu(z), n_wu), n_bu));
  g.loss_g = tape.cross_entropy(g.l_g, sample.label);

  int joint = tape.add(g.loss_y, tape.scale(g.loss_g, alpha));
  if (g.loss_l >= 0) joint = tape.add(joint, tape.scale(g.loss_l, beta));
  g.joint = joint;
  return g;
}

namespace {
constexpr char kMagic[8] = {'P', 'H', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainConfig& config, const corpus::Vocab& vocab,
                     const corpus::LabelManifest& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t ver = kVersion;
  out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  const int64_t hdr[5] = {params.encoder.vocab_size(), params.encoder.dim(),
                          params.encoder.n_classes(),
                          static_cast<int64_t>(params.encoder.layers.size()),
                          params.encoder.t_max()};
  out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  for (const Tensor* t : params.tensors()) {
    ensure_finite(*t, "save_checkpoint");
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(sizeof(double) * t->size()));
  }
  if (!out) throw std::runtime_error("short write to checkpoint: " + path);

  json labels_j = json::object();
  for (const auto& [name, idx] : labels) labels_j[name] = idx;
  json side{{"config", config_to_json(config)},
            {"labels", labels_j},
            {"vocab", vocab.tokens()}};
  std::ofstream sj(path + ".json");
  if (!sj) throw std::runtime_error("cannot write checkpoint sidecar");
  sj << side.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream sj(path + ".json");
  if (!sj)
    throw std::runtime_error("missing checkpoint sidecar: " + path + ".json");
  json side = json::parse(sj);

  Checkpoint ck;
  ck.config = config_from_json(side.at("config"));
  for (const auto& [name, idx] : side.at("labels").items())
    ck.labels[name] = idx.get<int64_t>();
  const auto& toks = side.at("vocab");
  for (size_t i = 0; i < toks.size(); ++i) {
    const std::string t = toks[i].get<std::string>();
    if (static_cast<int64_t>(i) < ck.vocab.size()) {
      if (ck.vocab.token_of(static_cast<int64_t>(i)) != t)
        throw std::runtime_error("checkpoint sidecar: reserved vocab slot mismatch");
    } else {
      ck.vocab.add(t);
    }
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver));
  int64_t hdr[5];
  in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!in) throw std::runtime_error("corrupt checkpoint header: " + path);
  if (hdr[0] != ck.vocab.size())
    throw std::runtime_error("checkpoint vocab size mismatch with sidecar");

  ck.params = make_model_shapes(hdr[0], hdr[1], hdr[2], hdr[3], hdr[4],
                                ck.config.k);
  for (Tensor* t : ck.params.tensors()) {
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(sizeof(double) * t->size()));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    ensure_finite(*t, "load_checkpoint");
  }
  return ck;
}

}  // namespace phx::model
