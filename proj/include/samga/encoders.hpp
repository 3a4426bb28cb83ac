#pragma once

#include "samga/layers.hpp"
#include "samga/linalg.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>

namespace samga {

// Variant of the EEG projector p_E.
enum class ProjectorKind { direct, linear, mlp };

std::string to_string(ProjectorKind kind);
ProjectorKind projector_from_string(const std::string& name);

// u^E = p_E(f(x)) on the flattened signal. f is the identity or one tanh
// hidden layer; p_E is identity-padded (direct: first d_common entries of f,
// zero-filled if f is narrower), affine (linear), or a tanh hidden layer of
// width d_common followed by an affine map (mlp).
template <typename T>
struct EEGEncoder {
  std::optional<Affine<T>> hidden;
  ProjectorKind kind = ProjectorKind::linear;
  std::optional<Affine<T>> proj_hidden;  // mlp only
  std::optional<Affine<T>> proj;         // linear and mlp
  int signal_dim = 0;
  int d_common = 0;

  int in_dim() const { return signal_dim; }
  int out_dim() const { return d_common; }

  template <typename U>
  EEGEncoder<U> cast() const {
    EEGEncoder<U> out;
    if (hidden) out.hidden = hidden->template cast<U>();
    out.kind = kind;
    out.signal_dim = signal_dim;
    out.d_common = d_common;
    if (proj_hidden) out.proj_hidden = proj_hidden->template cast<U>();
    if (proj) out.proj = proj->template cast<U>();
    return out;
  }
};

template <typename T>
struct EEGEncoderCache {
  Mat<T> input;
  Mat<T> hidden_act;       // tanh output of f, if present
  Mat<T> proj_hidden_act;  // tanh output inside an mlp projector
  Mat<T> output;
};

template <typename T>
EEGEncoderCache<T> encode_eeg_batch(const EEGEncoder<T>& enc, const Mat<T>& X) {
  require_dims(X.cols() == enc.in_dim(), "EEG input has " + std::to_string(X.cols()) +
                                             " features, encoder expects " + std::to_string(enc.in_dim()));
  EEGEncoderCache<T> cache;
  cache.input = X;
  Mat<T> f = X;
  if (enc.hidden) {
    cache.hidden_act = tanh_forward<T>(enc.hidden->forward(X));
    f = cache.hidden_act;
  }
  switch (enc.kind) {
    case ProjectorKind::direct: {
      const Eigen::Index w = std::min<Eigen::Index>(f.cols(), enc.d_common);
      cache.output = Mat<T>::Zero(f.rows(), enc.d_common);
      cache.output.leftCols(w) = f.leftCols(w);
      break;
    }
    case ProjectorKind::linear:
      cache.output = enc.proj->forward(f);
      break;
    case ProjectorKind::mlp:
      cache.proj_hidden_act = tanh_forward<T>(enc.proj_hidden->forward(f));
      cache.output = enc.proj->forward(cache.proj_hidden_act);
      break;
  }
  return cache;
}

// Single-trial convenience wrapper.
template <typename T>
Vec<T> encode_eeg(const EEGEncoder<T>& enc, const Vec<T>& flat_signal) {
  Mat<T> X = flat_signal.transpose();
  return encode_eeg_batch(enc, X).output.row(0).transpose();
}

// Accumulates into grad; the input gradient is not needed upstream.
template <typename T>
void encode_eeg_backward(const EEGEncoder<T>& enc, const EEGEncoderCache<T>& cache, const Mat<T>& dU,
                         EEGEncoder<T>& grad) {
  const Mat<T>& f = enc.hidden ? cache.hidden_act : cache.input;
  Mat<T> df;
  switch (enc.kind) {
    case ProjectorKind::direct: {
      const Eigen::Index w = std::min<Eigen::Index>(f.cols(), dU.cols());
      df = Mat<T>::Zero(f.rows(), f.cols());
      df.leftCols(w) = dU.leftCols(w);
      break;
    }
    case ProjectorKind::linear:
      df = enc.proj->backward(f, dU, *grad.proj);
      break;
    case ProjectorKind::mlp: {
      Mat<T> dA = enc.proj->backward(cache.proj_hidden_act, dU, *grad.proj);
      df = enc.proj_hidden->backward(f, tanh_backward<T>(cache.proj_hidden_act, dA), *grad.proj_hidden);
      break;
    }
  }
  if (enc.hidden) enc.hidden->backward(cache.input, tanh_backward<T>(cache.hidden_act, df), *grad.hidden);
}

// One parameter set applied to both modalities.
template <typename T>
struct SharedEncoder {
  Affine<T> map;  // G [d_z x d_common], g0 [d_z]
  bool frozen = false;

  template <typename U>
  SharedEncoder<U> cast() const {
    SharedEncoder<U> out;
    out.map = map.template cast<U>();
    out.frozen = frozen;
    return out;
  }
};

template <typename T>
Vec<T> encode_shared(const SharedEncoder<T>& shared, const Vec<T>& u) {
  return shared.map.apply(u);
}

template <typename T>
Mat<T> encode_shared_batch(const SharedEncoder<T>& shared, const Mat<T>& U) {
  return shared.map.forward(U);
}

}  // namespace samga
