#pragma once

// The full trainable model and its composite forward/backward pass.

#include "samga/encoders.hpp"
#include "samga/objectives.hpp"
#include "samga/rng.hpp"
#include "samga/target.hpp"

#include <span>
#include <string>
#include <vector>

namespace samga {

struct ModelSpec {
  int subjects = 0;
  std::vector<int> layer_dims;  // d_k per layer
  int signal_dim = 0;           // C * Tt
  int d_common = 32;
  int d_z = 32;
  int eeg_hidden_dim = 0;       // 0 disables the hidden layer
  ProjectorKind projector = ProjectorKind::linear;

  int K() const { return static_cast<int>(layer_dims.size()); }
  void validate() const;
};

struct RouterSettings {
  double tau = 1.0;
  double p_subject = 0.2;
  double p_layer = 0.1;
  double epsilon = 1e-8;
  bool depth_prior = true;  // false: all-zero global logits
  bool trainable = true;
  int fixed_layer = -1;     // >= 0 pins routing one-hot on this layer
};

template <typename T>
struct ParamView {
  std::string name;
  std::span<T> values;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool frozen = false;
};

template <typename T>
struct ModelParams {
  ModelSpec spec;
  LayerProjectorBank<T> projectors;
  Router<T> router;
  EEGEncoder<T> eeg;
  SharedEncoder<T> shared;
  ContrastiveHead<T> head;

  // Visits every parameter block in a fixed order.
  template <typename F>
  void for_each_block(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    visit_impl(*this, f);
  }

  // Same structure, all values zero (gradient / moment container).
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each_block([](const ParamView<T>& v) { std::fill(v.values.begin(), v.values.end(), T(0)); });
    return z;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.spec = spec;
    out.projectors = projectors.template cast<U>();
    out.router = router.template cast<U>();
    out.eeg = eeg.template cast<U>();
    out.shared = shared.template cast<U>();
    out.head = head.template cast<U>();
    return out;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    using Elem = std::conditional_t<std::is_const_v<Self>, const T, T>;
    auto emit = [&](const std::string& name, auto& m, bool frozen) {
      f(ParamView<Elem>{name, std::span<Elem>(m.data(), static_cast<std::size_t>(m.size())), m.rows(), m.cols(),
                        frozen});
    };
    auto emit_affine = [&](const std::string& prefix, auto& a, const char* wname, const char* bname, bool frozen) {
      emit(prefix + wname, a.W, frozen);
      emit(prefix + bname, a.b, frozen);
    };
    for (std::size_t k = 0; k < self.projectors.layers.size(); ++k)
      emit_affine("projector." + std::to_string(k) + ".", self.projectors.layers[k], "W", "c", false);
    const bool router_frozen = !self.router.trainable();
    emit("router.q", self.router.q, router_frozen);
    emit("router.b", self.router.b, router_frozen);
    if (self.eeg.hidden) emit_affine("eeg.hidden.", *self.eeg.hidden, "W", "b", false);
    if (self.eeg.proj_hidden) emit_affine("eeg.proj_hidden.", *self.eeg.proj_hidden, "W", "b", false);
    if (self.eeg.proj) emit_affine("eeg.proj.", *self.eeg.proj, "W", "b", false);
    emit_affine("shared.", self.shared.map, "G", "g0", self.shared.frozen);
    f(ParamView<Elem>{"head.log_tau", std::span<Elem>(&self.head.log_tau, 1), 1, 1, false});
  }
};

// Allocates a model and initializes it from the "init" sub-stream of `seed`.
template <typename T>
ModelParams<T> init_model(const ModelSpec& spec, const RouterSettings& rs, double tau_init, std::uint64_t seed) {
  spec.validate();
  ModelParams<T> p;
  p.spec = spec;
  Engine rng = make_engine(seed, "init");
  for (int dk : spec.layer_dims) {
    Affine<T> a(spec.d_common, dk);
    a.init_glorot(rng);
    p.projectors.layers.push_back(std::move(a));
  }
  p.router = Router<T>(spec.subjects, spec.K());
  if (!rs.depth_prior) p.router.q.setZero();
  p.router.tau = static_cast<T>(rs.tau);
  p.router.p_subject = rs.p_subject;
  p.router.p_layer = rs.p_layer;
  p.router.epsilon = static_cast<T>(rs.epsilon);
  p.router.frozen = !rs.trainable;
  if (rs.fixed_layer >= 0) {
    Vec<T> w = Vec<T>::Zero(spec.K());
    w[rs.fixed_layer] = T(1);
    p.router.fixed_weights = w;
  }
  p.router.validate();

  int f_dim = spec.signal_dim;
  if (spec.eeg_hidden_dim > 0) {
    p.eeg.hidden = Affine<T>(spec.eeg_hidden_dim, spec.signal_dim);
    p.eeg.hidden->init_glorot(rng);
    f_dim = spec.eeg_hidden_dim;
  }
  p.eeg.kind = spec.projector;
  p.eeg.signal_dim = spec.signal_dim;
  p.eeg.d_common = spec.d_common;
  if (spec.projector == ProjectorKind::mlp) {
    p.eeg.proj_hidden = Affine<T>(spec.d_common, f_dim);
    p.eeg.proj_hidden->init_glorot(rng);
    f_dim = spec.d_common;
  }
  if (spec.projector != ProjectorKind::direct) {
    p.eeg.proj = Affine<T>(spec.d_common, f_dim);
    p.eeg.proj->init_glorot(rng);
  }
  p.shared.map = Affine<T>(spec.d_z, spec.d_common);
  p.shared.map.init_glorot(rng);
  p.head.log_tau = static_cast<T>(std::log(tau_init));
  return p;
}

template <typename T>
struct Batch {
  Mat<T> eeg;                 // [M x signal_dim]
  std::vector<Mat<T>> layers;  // K x [M x d_k]
  std::vector<int> subjects;  // [M]

  Eigen::Index size() const { return eeg.rows(); }
};

// Realized dropout for one batch; held fixed through a forward/backward pair.
template <typename T>
struct BatchRouting {
  std::vector<int> r;
  std::vector<Vec<T>> masks;
};

template <typename T>
BatchRouting<T> no_dropout(Eigen::Index M, int K) {
  return BatchRouting<T>{std::vector<int>(M, 1), std::vector<Vec<T>>(M, Vec<T>::Ones(K))};
}

template <typename T>
struct Objective {
  double lambda = 0.0;  // 0 gives the pure retrieval objective
  MMDConfig mmd;
  std::optional<T> bandwidth;  // frozen MMD base bandwidth; median heuristic when absent
};

struct LossBreakdown {
  double ret = 0.0;
  double mmd = 0.0;
  double total = 0.0;
  double bandwidth = 0.0;
};

template <typename T>
struct Embeddings {
  Mat<T> ze, zi, ue, ui;
};

// Forward pass of one batch. When `grad` is non-null, exact gradients of the
// total objective are accumulated into it. Frozen blocks still get their
// gradients computed; the optimizer skips them.
template <typename T>
LossBreakdown forward_backward(const ModelParams<T>& p, const Batch<T>& batch, const BatchRouting<T>& routing,
                               const Objective<T>& obj, ModelParams<T>* grad, Embeddings<T>* emb = nullptr) {
  const Eigen::Index M = batch.size();
  const int K = p.spec.K();
  require_dims(static_cast<int>(batch.layers.size()) == K, "batch carries wrong number of layers");
  require_dims(static_cast<Eigen::Index>(batch.subjects.size()) == M, "batch subject list size");

  // Image side: project every layer, route per sample, fuse.
  std::vector<Mat<T>> projected(K);
  for (int k = 0; k < K; ++k) projected[k] = p.projectors.layers[k].forward(batch.layers[k]);
  std::vector<RoutingDraw<T>> draws(M);
  Mat<T> ui = Mat<T>::Zero(M, p.spec.d_common);
  for (Eigen::Index n = 0; n < M; ++n) {
    draws[n] = route_with_masks(p.router, batch.subjects[n], routing.r[n], routing.masks[n]);
    for (int k = 0; k < K; ++k) ui.row(n) += draws[n].alpha_hat[k] * projected[k].row(n);
  }

  const EEGEncoderCache<T> eeg_cache = encode_eeg_batch(p.eeg, batch.eeg);
  const Mat<T>& ue = eeg_cache.output;
  const Mat<T> ze = encode_shared_batch(p.shared, ue);
  const Mat<T> zi = encode_shared_batch(p.shared, ui);

  const PairLoss<T> ret = retrieval_loss_grad(p.head, ze, zi);
  const T bw = obj.bandwidth ? *obj.bandwidth : median_bandwidth<T>(ze, zi);
  const PairLoss<T> mmd = mmd_loss_grad(obj.mmd, ze, zi, std::optional<T>(bw));
  const T lambda = static_cast<T>(obj.lambda);

  LossBreakdown out;
  out.ret = static_cast<double>(ret.value);
  out.mmd = static_cast<double>(mmd.value);
  out.total = obj.lambda == 0.0 ? out.ret : static_cast<double>(lambda * mmd.value + (T(1) - lambda) * ret.value);
  out.bandwidth = static_cast<double>(bw);
  if (emb) *emb = Embeddings<T>{ze, zi, ue, ui};
  if (!grad) return out;

  Mat<T> d_ze = (T(1) - lambda) * ret.d_ze;
  Mat<T> d_zi = (T(1) - lambda) * ret.d_zi;
  if (obj.lambda != 0.0) {
    d_ze += lambda * mmd.d_ze;
    d_zi += lambda * mmd.d_zi;
  }
  grad->head.log_tau += (T(1) - lambda) * ret.d_log_tau;

  // Shared encoder: one parameter set, gradients from both paths add.
  const Mat<T> d_ue = p.shared.map.backward(ue, d_ze, grad->shared.map);
  const Mat<T> d_ui = p.shared.map.backward(ui, d_zi, grad->shared.map);

  encode_eeg_backward(p.eeg, eeg_cache, d_ue, grad->eeg);

  std::vector<Mat<T>> d_proj(K, Mat<T>(M, p.spec.d_common));
  for (Eigen::Index n = 0; n < M; ++n) {
    Vec<T> d_alpha_hat(K);
    for (int k = 0; k < K; ++k) {
      d_alpha_hat[k] = d_ui.row(n).dot(projected[k].row(n));
      d_proj[k].row(n) = draws[n].alpha_hat[k] * d_ui.row(n);
    }
    route_backward(p.router, batch.subjects[n], draws[n], d_alpha_hat, grad->router.q, grad->router.b);
  }
  for (int k = 0; k < K; ++k) p.projectors.layers[k].backward(batch.layers[k], d_proj[k], grad->projectors.layers[k]);
  return out;
}

// Shared-space EEG embeddings for a stack of flattened trials.
template <typename T>
Mat<T> embed_eeg(const ModelParams<T>& p, const Mat<T>& signals) {
  return encode_shared_batch(p.shared, encode_eeg_batch(p.eeg, signals).output);
}

// Shared-space image embeddings with inference routing (global prior only).
template <typename T>
Mat<T> embed_images(const ModelParams<T>& p, const std::vector<Mat<T>>& layer_feats) {
  const Vec<T> w = route_infer(p.router);
  require_dims(static_cast<int>(layer_feats.size()) == p.spec.K(), "image features carry wrong number of layers");
  Mat<T> ui = Mat<T>::Zero(layer_feats.front().rows(), p.spec.d_common);
  for (int k = 0; k < p.spec.K(); ++k) ui += w[k] * p.projectors.layers[k].forward(layer_feats[k]);
  return encode_shared_batch(p.shared, ui);
}

}  // namespace samga
