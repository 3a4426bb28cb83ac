#pragma once

#include "samga/linalg.hpp"

#include <random>

namespace samga {

// y = W x + b, applied row-wise to a batch: Y = X W^T + 1 b^T.
template <typename T>
struct Affine {
  Mat<T> W;  // [out x in]
  Vec<T> b;  // [out]

  Affine() = default;
  Affine(int out, int in) : W(Mat<T>::Zero(out, in)), b(Vec<T>::Zero(out)) {}

  int in_dim() const { return static_cast<int>(W.cols()); }
  int out_dim() const { return static_cast<int>(W.rows()); }

  Vec<T> apply(const Vec<T>& x) const {
    require_dims(x.size() == W.cols(), "affine input has " + std::to_string(x.size()) +
                                           " entries, expected " + std::to_string(W.cols()));
    return W * x + b;
  }

  Mat<T> forward(const Mat<T>& X) const {
    require_dims(X.cols() == W.cols(), "affine batch has " + std::to_string(X.cols()) +
                                           " columns, expected " + std::to_string(W.cols()));
    Mat<T> Y = X * W.transpose();
    Y.rowwise() += b.transpose();
    return Y;
  }

  // Accumulates parameter gradients into `grad` and returns dL/dX.
  Mat<T> backward(const Mat<T>& X, const Mat<T>& dY, Affine<T>& grad) const {
    grad.W.noalias() += dY.transpose() * X;
    grad.b += dY.colwise().sum().transpose();
    return dY * W;
  }

  // Glorot-uniform weights, zero bias.
  template <typename Rng>
  void init_glorot(Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = static_cast<T>(dist(rng));
    b.setZero();
  }

  template <typename U>
  Affine<U> cast() const {
    Affine<U> out;
    out.W = W.template cast<U>();
    out.b = b.template cast<U>();
    return out;
  }
};

template <typename T>
Mat<T> tanh_forward(const Mat<T>& X) {
  return X.array().tanh().matrix();
}

// Given A = tanh(X) and dL/dA, returns dL/dX.
template <typename T>
Mat<T> tanh_backward(const Mat<T>& A, const Mat<T>& dA) {
  return (dA.array() * (T(1) - A.array().square())).matrix();
}

}  // namespace samga
