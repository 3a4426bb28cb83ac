#pragma once

// Subject-aware multi-granularity target construction: per-layer projection,
// routing over visual depth with subject and layer dropout, and fusion.

#include "samga/layers.hpp"
#include "samga/linalg.hpp"
#include "samga/rng.hpp"

#include <optional>
#include <random>
#include <vector>

namespace samga {

// One affine projector per visual layer, all mapping into d_common.
template <typename T>
struct LayerProjectorBank {
  std::vector<Affine<T>> layers;

  int K() const { return static_cast<int>(layers.size()); }
  int d_common() const { return layers.empty() ? 0 : layers.front().out_dim(); }

  template <typename U>
  LayerProjectorBank<U> cast() const {
    LayerProjectorBank<U> out;
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    return out;
  }
};

template <typename T>
std::vector<Vec<T>> project_layer_features(const LayerProjectorBank<T>& bank,
                                           const std::vector<Vec<T>>& h) {
  require_dims(static_cast<int>(h.size()) == bank.K(),
               "feature stack has " + std::to_string(h.size()) + " layers, projector bank has " +
                   std::to_string(bank.K()));
  std::vector<Vec<T>> out;
  out.reserve(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out.push_back(bank.layers[k].apply(h[k]));
  return out;
}

// Global depth prior centered at the middle layer: -|k - center|.
template <typename T>
Vec<T> depth_prior_logits(int K) {
  Vec<T> q(K);
  const double center = 0.5 * (K - 1);
  for (int k = 0; k < K; ++k) q[k] = static_cast<T>(-std::abs(k - center));
  return q;
}

template <typename T>
struct Router {
  Vec<T> q;          // global logits [K]
  Mat<T> b;          // subject bias [S x K]
  T tau = T(1);      // routing temperature
  double p_subject = 0.2;
  double p_layer = 0.1;
  T epsilon = T(1e-8);
  // When set, routing is pinned to these weights: no dropout, no subject term,
  // and the router receives no gradient.
  std::optional<Vec<T>> fixed_weights;
  bool frozen = false;

  Router() = default;
  Router(int subjects, int K) : q(depth_prior_logits<T>(K)), b(Mat<T>::Zero(subjects, K)) {}

  int K() const { return static_cast<int>(q.size()); }
  int S() const { return static_cast<int>(b.rows()); }
  bool trainable() const { return !frozen && !fixed_weights; }

  void validate() const {
    if (!(tau > T(0))) throw std::invalid_argument("router.tau must be positive");
    if (!(p_subject >= 0.0 && p_subject < 1.0)) throw std::invalid_argument("router.p_subject must lie in [0, 1)");
    if (!(p_layer >= 0.0 && p_layer < 1.0)) throw std::invalid_argument("router.p_layer must lie in [0, 1)");
    if (!(epsilon > T(0))) throw std::invalid_argument("router.epsilon must be positive");
    require_dims(b.cols() == q.size(), "router bias width differs from K");
  }

  template <typename U>
  Router<U> cast() const {
    Router<U> out;
    out.q = q.template cast<U>();
    out.b = b.template cast<U>();
    out.tau = static_cast<U>(tau);
    out.p_subject = p_subject;
    out.p_layer = p_layer;
    out.epsilon = static_cast<U>(epsilon);
    if (fixed_weights) out.fixed_weights = fixed_weights->template cast<U>();
    out.frozen = frozen;
    return out;
  }
};

template <typename T>
struct RoutingDraw {
  int r = 1;           // subject-bias retained?
  Vec<T> mask;         // layer keep mask, 0/1
  Vec<T> alpha;        // preliminary weights
  Vec<T> alpha_hat;    // final weights
};

// Deterministic part of training-time routing given realized dropout draws.
template <typename T>
RoutingDraw<T> route_with_masks(const Router<T>& router, int subject, int r, const Vec<T>& mask) {
  RoutingDraw<T> draw;
  draw.r = r;
  draw.mask = mask;
  if (router.fixed_weights) {
    draw.alpha = *router.fixed_weights;
    draw.alpha_hat = *router.fixed_weights;
    draw.mask = Vec<T>::Ones(router.K());
    return draw;
  }
  require_dims(mask.size() == router.q.size(), "layer mask length differs from K");
  Vec<T> logits = router.q;
  if (r) logits += router.b.row(subject).transpose();
  draw.alpha = softmax<T>(logits, router.tau);
  const Vec<T> kept = mask.cwiseProduct(draw.alpha);
  draw.alpha_hat = kept / (kept.sum() + router.epsilon);
  return draw;
}

// Training-time routing. Draw order is fixed: r first, then m_1..m_K.
template <typename T>
RoutingDraw<T> route_train(const Router<T>& router, int subject, Engine& rng) {
  if (subject < 0 || subject >= router.S()) {
    throw std::out_of_range("subject " + std::to_string(subject) + " outside router bias table");
  }
  std::bernoulli_distribution keep_subject(1.0 - router.p_subject);
  std::bernoulli_distribution keep_layer(1.0 - router.p_layer);
  const int r = keep_subject(rng) ? 1 : 0;
  Vec<T> mask(router.K());
  for (int k = 0; k < router.K(); ++k) mask[k] = keep_layer(rng) ? T(1) : T(0);
  return route_with_masks(router, subject, r, mask);
}

// Inference routing uses only the global prior; no subject input exists.
template <typename T>
Vec<T> route_infer(const Router<T>& router) {
  if (router.fixed_weights) return *router.fixed_weights;
  return softmax<T>(router.q, router.tau);
}

// Backpropagates dL/d(alpha_hat) into the router's q and b.
template <typename T>
void route_backward(const Router<T>& router, int subject, const RoutingDraw<T>& draw,
                    const Vec<T>& d_alpha_hat, Vec<T>& grad_q, Mat<T>& grad_b) {
  if (router.fixed_weights) return;
  const T denom = draw.mask.dot(draw.alpha) + router.epsilon;
  const T centered = d_alpha_hat.dot(draw.alpha_hat);
  Vec<T> d_alpha = (draw.mask.array() * (d_alpha_hat.array() - centered)).matrix() / denom;
  const T mean = d_alpha.dot(draw.alpha);
  Vec<T> d_logits = (draw.alpha.array() * (d_alpha.array() - mean)).matrix() / router.tau;
  grad_q += d_logits;
  if (draw.r) grad_b.row(subject) += d_logits.transpose();
}

template <typename T>
Vec<T> fuse_target(const Vec<T>& weights, const std::vector<Vec<T>>& projected) {
  require_dims(weights.size() == static_cast<Eigen::Index>(projected.size()),
               "fusion weights length differs from number of layers");
  require_dims(!projected.empty(), "fusion needs at least one layer");
  Vec<T> u = Vec<T>::Zero(projected.front().size());
  for (std::size_t k = 0; k < projected.size(); ++k) u += weights[k] * projected[k];
  return u;
}

// deviation[s, k] = softmax((q + b_s)/tau)_k - softmax(q/tau)_k
template <typename T>
Mat<T> routing_deviation(const Router<T>& router) {
  const Vec<T> global = softmax<T>(router.q, router.tau);
  Mat<T> dev(router.S(), router.K());
  for (int s = 0; s < router.S(); ++s) {
    const Vec<T> logits = router.q + router.b.row(s).transpose();
    dev.row(s) = (softmax<T>(logits, router.tau) - global).transpose();
  }
  return dev;
}

}  // namespace samga
