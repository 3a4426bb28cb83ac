#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace samga {

// Row-major throughout so that a batch matrix row is one sample and the raw
// buffer matches the on-disk layout.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatF = Mat<float>;
using MatD = Mat<double>;

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError("dimension mismatch: " + what);
}

// Numerically stable softmax of `logits / temperature`.
template <typename T>
Vec<T> softmax(const Vec<T>& logits, T temperature = T(1)) {
  Vec<T> scaled = logits / temperature;
  const T peak = scaled.maxCoeff();
  Vec<T> out = (scaled.array() - peak).exp();
  return out / out.sum();
}

// Rows scaled to unit Euclidean norm. Throws on a zero row since cosine
// similarity is undefined there.
template <typename T>
Mat<T> normalize_rows(const Mat<T>& x, const char* what = "embedding") {
  Mat<T> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T n = x.row(i).norm();
    if (!(n > T(0))) {
      throw std::domain_error(std::string("zero-norm ") + what + " row " + std::to_string(i));
    }
    out.row(i) = x.row(i) / n;
  }
  return out;
}

template <typename T>
bool all_finite(const Mat<T>& x) {
  return x.allFinite();
}

}  // namespace samga
