#include "phx/trainer.h"

#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "phx/numerics.h"

namespace phx::trainer {

Adam::Adam(double lr, const std::vector<Tensor*>& params) : lr_(lr) {
  for (const Tensor* p : params) {
    Tensor z = *p;
    z.fill(0.0);
    m_.push_back(z);
    v_.push_back(std::move(z));
  }
}

void Adam::step(const std::vector<Tensor*>& params,
                const std::vector<Tensor>& grads) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    for (int64_t j = 0; j < p.size(); ++j) {
      m(j) = b1 * m(j) + (1.0 - b1) * g(j);
      v(j) = b2 * v(j) + (1.0 - b2) * g(j) * g(j);
      p(j) -= lr_ * (m(j) / c1) / (std::sqrt(v(j) / c2) + eps);
    }
  }
}

std::vector<Tensor> zero_grads(const model::ModelParams& p) {
  std::vector<Tensor> out;
  for (const Tensor* t : p.tensors()) {
    Tensor z = *t;
    z.fill(0.0);
    out.push_back(std::move(z));
  }
  return out;
}

namespace {

struct SampleLoss {
  double joint, l_y, l_l, l_g;
  int64_t pred;
};

SampleLoss run_sample(const corpus::Sample& s, const model::ModelParams& params,
                      const gil::ConceptStore& store, double alpha, double beta,
                      const gil::Retrieval* frozen, std::vector<Tensor>* grads,
                      double grad_scale) {
  Tape tape;
  model::SampleGraph g =
      model::joint_graph(tape, params, s, store, alpha, beta, frozen);
  SampleLoss out;
  out.joint = tape.val(g.joint)(0);
  out.l_y = tape.val(g.loss_y)(0);
  out.l_l = g.loss_l >= 0 ? tape.val(g.loss_l)(0) : 0.0;
  out.l_g = tape.val(g.loss_g)(0);
  out.pred = num::argmax(tape.val(g.l_y));
  if (grads) {
    tape.backward(g.joint);
    tape.add_param_grads(*grads, grad_scale);
  }
  return out;
}

}  // namespace

BatchLoss joint_loss(const std::vector<const corpus::Sample*>& batch,
                     const model::ModelParams& params,
                     const gil::ConceptStore& store, double alpha, double beta,
                     std::vector<Tensor>* grads,
                     const std::vector<gil::Retrieval>* frozen, int64_t threads,
                     std::vector<int64_t>* preds) {
  const int64_t b = static_cast<int64_t>(batch.size());
  if (b == 0) throw std::invalid_argument("joint_loss: empty batch");
  if (frozen && static_cast<int64_t>(frozen->size()) != b)
    throw std::invalid_argument("joint_loss: frozen retrieval count != batch");
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<SampleLoss> losses(static_cast<size_t>(b));
  if (threads > 1 && b > 1) {
    // per-sample gradient slots, reduced in sample order below
    std::vector<std::vector<Tensor>> slots;
    if (grads) slots.assign(static_cast<size_t>(b), zero_grads(params));
#pragma omp parallel for schedule(dynamic, 1)
    for (int64_t i = 0; i < b; ++i) {
      losses[i] = run_sample(*batch[i], params, store, alpha, beta,
                             frozen ? &(*frozen)[i] : nullptr,
                             grads ? &slots[i] : nullptr, inv_b);
    }
    if (grads) {
      for (int64_t i = 0; i < b; ++i)
        for (size_t t = 0; t < grads->size(); ++t) {
          Tensor& dst = (*grads)[t];
          const Tensor& src = slots[static_cast<size_t>(i)][t];
          for (int64_t j = 0; j < dst.size(); ++j) dst(j) += src(j);
        }
    }
  } else {
    for (int64_t i = 0; i < b; ++i)
      losses[i] = run_sample(*batch[i], params, store, alpha, beta,
                             frozen ? &(*frozen)[i] : nullptr, grads, inv_b);
  }

  if (preds) {
    preds->clear();
    for (const SampleLoss& l : losses) preds->push_back(l.pred);
  }
  BatchLoss out;
  for (const SampleLoss& l : losses) {
    out.joint += l.joint;
    out.l_y += l.l_y;
    out.l_l += l.l_l;
    out.l_g += l.l_g;
  }
  out.joint *= inv_b;
  out.l_y *= inv_b;
  out.l_l *= inv_b;
  out.l_g *= inv_b;
  return out;
}

TrainResult train(const TrainConfig& config, const corpus::Dataset& train_set,
                  const corpus::Dataset& dev_set) {
  config.validate();
  if (train_set.samples.empty()) throw std::runtime_error("train: empty training set");
  for (const corpus::Dataset* ds : {&train_set, &dev_set})
    for (const auto& s : ds->samples)
      if (static_cast<int64_t>(s.token_ids.size()) > config.t_max)
        throw std::runtime_error("train: sample '" + s.id + "' longer than t_max");

  const int64_t n_classes = static_cast<int64_t>(train_set.labels.size());
  model::ModelParams params = model::init_model(
      train_set.vocab.size(), config.d, n_classes, config.n_layers,
      config.t_max, config.k, config.seed);
  gil::ConceptStore store =
      gil::build_store(train_set.samples, params.encoder.embedding, 0);
  if (store.size() < config.k)
    throw std::runtime_error("train: store has " + std::to_string(store.size()) +
                             " concepts, fewer than K=" + std::to_string(config.k));

  auto ptrs = params.tensors();
  Adam opt(config.lr, ptrs);
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult res;
  res.vocab = train_set.vocab;
  res.labels = train_set.labels;

  const int64_t n = static_cast<int64_t>(train_set.samples.size());
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  int64_t global_step = 0;
  double train_seconds = 0.0;
  double best_dev_loss = std::numeric_limits<double>::infinity();
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch;
    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t beg = 0; beg < n; beg += config.batch_size) {
      const int64_t end = std::min(n, beg + config.batch_size);
      std::vector<const corpus::Sample*> batch;
      batch.reserve(static_cast<size_t>(end - beg));
      for (int64_t i = beg; i < end; ++i)
        batch.push_back(&train_set.samples[static_cast<size_t>(order[i])]);

      std::vector<Tensor> grads = zero_grads(params);
      const BatchLoss bl = joint_loss(batch, params, store, config.alpha,
                                      config.beta, &grads, nullptr,
                                      config.threads);
      if (!std::isfinite(bl.joint))
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            " step " + std::to_string(global_step) + " (L_Y=" +
            std::to_string(bl.l_y) + " L_L=" + std::to_string(bl.l_l) +
            " L_G=" + std::to_string(bl.l_g) + ")");
      const double bsz = static_cast<double>(end - beg);
      em.train_loss += bl.joint * bsz;
      em.train_l_y += bl.l_y * bsz;
      em.train_l_l += bl.l_l * bsz;
      em.train_l_g += bl.l_g * bsz;

      opt.step(ptrs, grads);
      ++global_step;
      if (config.reindex_interval_steps > 0 &&
          global_step % config.reindex_interval_steps == 0)
        gil::reindex(store, params.encoder.embedding, global_step);
    }
    const auto t1 = std::chrono::steady_clock::now();
    train_seconds += std::chrono::duration<double>(t1 - t0).count();
    if (config.reindex_interval_steps == 0)
      gil::reindex(store, params.encoder.embedding, global_step);

    em.train_loss /= static_cast<double>(n);
    em.train_l_y /= static_cast<double>(n);
    em.train_l_l /= static_cast<double>(n);
    em.train_l_g /= static_cast<double>(n);

    // dev pass, forward only
    int64_t correct = 0;
    const int64_t dn = static_cast<int64_t>(dev_set.samples.size());
    for (int64_t beg = 0; beg < dn; beg += config.batch_size) {
      const int64_t end = std::min(dn, beg + config.batch_size);
      std::vector<const corpus::Sample*> batch;
      for (int64_t i = beg; i < end; ++i)
        batch.push_back(&dev_set.samples[static_cast<size_t>(i)]);
      std::vector<int64_t> preds;
      const BatchLoss bl =
          joint_loss(batch, params, store, config.alpha, config.beta, nullptr,
                     nullptr, config.threads, &preds);
      for (int64_t i = beg; i < end; ++i)
        if (preds[static_cast<size_t>(i - beg)] ==
            dev_set.samples[static_cast<size_t>(i)].label)
          ++correct;
      const double bsz = static_cast<double>(end - beg);
      em.dev_loss += bl.joint * bsz;
      em.dev_l_y += bl.l_y * bsz;
      em.dev_l_l += bl.l_l * bsz;
      em.dev_l_g += bl.l_g * bsz;
    }
    if (dn > 0) {
      em.dev_loss /= static_cast<double>(dn);
      em.dev_l_y /= static_cast<double>(dn);
      em.dev_l_l /= static_cast<double>(dn);
      em.dev_l_g /= static_cast<double>(dn);
      em.dev_acc = static_cast<double>(correct) / static_cast<double>(dn);
    }
    res.report.epochs.push_back(em);

    // accuracy ties broken by lower dev joint loss, so the retained model
    // keeps improving its GIL/LIL heads after accuracy saturates
    const bool better =
        res.report.best_epoch < 0 || em.dev_acc > res.report.best_dev_acc ||
        (em.dev_acc == res.report.best_dev_acc && em.dev_loss < best_dev_loss);
    if (better) {
      res.report.best_epoch = epoch;
      res.report.best_dev_acc = em.dev_acc;
      best_dev_loss = em.dev_loss;
      res.best_params = params;
    }
  }

  res.report.total_steps = global_step;
  res.report.steps_per_sec =
      train_seconds > 0 ? static_cast<double>(global_step) / train_seconds : 0.0;

  // store paired with the retained checkpoint
  res.best_store = store;
  gil::reindex(res.best_store, res.best_params.encoder.embedding, global_step);
  return res;
}

EvalResult evaluate(const model::Checkpoint& ck,
                    const std::vector<corpus::Sample>& samples) {
  EvalResult out;
  out.per_class.resize(ck.labels.size());
  int64_t correct = 0;
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= static_cast<int64_t>(ck.labels.size()))
      throw std::runtime_error("evaluate: label index out of range for sample " + s.id);
    const auto e = enc::encode(s, ck.params.encoder);
    const auto [l_y, p_c] = enc::classify(e.pooled, ck.params.encoder);
    auto& cs = out.per_class[static_cast<size_t>(s.label)];
    ++cs.total;
    if (p_c == s.label) {
      ++cs.correct;
      ++correct;
    }
  }
  if (!samples.empty())
    out.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return out;
}

}  // namespace phx::trainer
