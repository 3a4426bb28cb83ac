#pragma once

// Symmetric contrastive retrieval loss, multi-kernel MMD and the two-stage
// objective. Every loss returns its value together with exact gradients.

#include "samga/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace samga {

template <typename T>
struct ContrastiveHead {
  T log_tau = static_cast<T>(std::log(0.07));

  T tau() const { return std::exp(log_tau); }

  template <typename U>
  ContrastiveHead<U> cast() const {
    return ContrastiveHead<U>{static_cast<U>(log_tau)};
  }
};

template <typename T>
struct PairLoss {
  T value = T(0);
  Mat<T> d_ze;  // dL/dZ_E
  Mat<T> d_zi;  // dL/dZ_I
  T d_log_tau = T(0);
};

namespace detail {

// d/dZ of row-normalization: (g - n (n . g)) / |z|
template <typename T>
Mat<T> normalize_rows_backward(const Mat<T>& Z, const Mat<T>& N, const Mat<T>& dN) {
  Mat<T> dZ(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const T proj = N.row(i).dot(dN.row(i));
    dZ.row(i) = (dN.row(i) - proj * N.row(i)) / Z.row(i).norm();
  }
  return dZ;
}

}  // namespace detail

// Bidirectional InfoNCE on cosine similarities scaled by 1/tau, averaged with
// the 1/(2M) factor. Row i of Z_E is paired with row i of Z_I.
template <typename T>
PairLoss<T> retrieval_loss_grad(const ContrastiveHead<T>& head, const Mat<T>& ze, const Mat<T>& zi) {
  require_dims(ze.rows() == zi.rows() && ze.cols() == zi.cols(), "retrieval loss inputs must be paired");
  const Eigen::Index M = ze.rows();
  if (M < 2) throw std::invalid_argument("retrieval loss needs M >= 2 paired samples");

  const Mat<T> ne = normalize_rows<T>(ze, "EEG embedding");
  const Mat<T> ni = normalize_rows<T>(zi, "image embedding");
  const T inv_tau = std::exp(-head.log_tau);
  const Mat<T> logits = (ne * ni.transpose()) * inv_tau;

  Mat<T> p_row(M, M), p_col(M, M);
  T total = T(0);
  for (Eigen::Index i = 0; i < M; ++i) {
    const T peak = logits.row(i).maxCoeff();
    const auto e = (logits.row(i).array() - peak).exp();
    const T z = e.sum();
    p_row.row(i) = e / z;
    total += peak + std::log(z) - logits(i, i);
  }
  for (Eigen::Index j = 0; j < M; ++j) {
    const T peak = logits.col(j).maxCoeff();
    const auto e = (logits.col(j).array() - peak).exp();
    const T z = e.sum();
    p_col.col(j) = e / z;
    total += peak + std::log(z) - logits(j, j);
  }

  PairLoss<T> out;
  const T scale = T(1) / (T(2) * static_cast<T>(M));
  out.value = total * scale;
  Mat<T> d_logits = (p_row + p_col) * scale;
  d_logits.diagonal().array() -= T(2) * scale;
  out.d_log_tau = -(d_logits.array() * logits.array()).sum();
  const Mat<T> d_sim = d_logits * inv_tau;
  out.d_ze = detail::normalize_rows_backward<T>(ze, ne, d_sim * ni);
  out.d_zi = detail::normalize_rows_backward<T>(zi, ni, d_sim.transpose() * ne);
  return out;
}

template <typename T>
T retrieval_loss(const ContrastiveHead<T>& head, const Mat<T>& ze, const Mat<T>& zi) {
  return retrieval_loss_grad(head, ze, zi).value;
}

struct MMDConfig {
  std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0, 4.0};

  void validate() const {
    if (multipliers.empty()) throw std::invalid_argument("loss.mmd_multipliers must not be empty");
    for (double m : multipliers) {
      if (!(m > 0.0)) throw std::invalid_argument("loss.mmd_multipliers entries must be positive");
    }
  }
};

// Median pairwise squared distance over the pooled 2M points (distinct index
// pairs). Falls back to 1 when every point coincides.
template <typename T>
T median_bandwidth(const Mat<T>& ze, const Mat<T>& zi) {
  Mat<T> pooled(ze.rows() + zi.rows(), ze.cols());
  pooled << ze, zi;
  std::vector<T> d2;
  d2.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d2.push_back((pooled.row(i) - pooled.row(j)).squaredNorm());
  if (d2.empty()) return T(1);
  std::sort(d2.begin(), d2.end());
  const std::size_t n = d2.size();
  const T med = n % 2 ? d2[n / 2] : (d2[n / 2 - 1] + d2[n / 2]) / T(2);
  return med > T(0) ? med : T(1);
}

// Mean over multipliers m of exp(-|x - y|^2 / (m * base)).
template <typename T>
T mk_rbf(const MMDConfig& cfg, T base, T sq_dist) {
  T k = T(0);
  for (double m : cfg.multipliers) k += std::exp(-sq_dist / (static_cast<T>(m) * base));
  return k / static_cast<T>(cfg.multipliers.size());
}

template <typename T>
T mk_rbf_dsq(const MMDConfig& cfg, T base, T sq_dist) {
  T dk = T(0);
  for (double m : cfg.multipliers) {
    const T s = static_cast<T>(m) * base;
    dk -= std::exp(-sq_dist / s) / s;
  }
  return dk / static_cast<T>(cfg.multipliers.size());
}

// Within-set sums skip i == j and divide by M(M-1); the cross-set sum covers
// all (i, j) with factor 2/M^2. The estimator can be negative and is not
// clamped. `base` is treated as a constant; when absent it is the median
// heuristic of this call.
template <typename T>
PairLoss<T> mmd_loss_grad(const MMDConfig& cfg, const Mat<T>& ze, const Mat<T>& zi,
                          std::optional<T> base = std::nullopt) {
  require_dims(ze.rows() == zi.rows() && ze.cols() == zi.cols(), "MMD inputs must have equal shape");
  const Eigen::Index M = ze.rows();
  if (M < 2) throw std::invalid_argument("MMD needs M >= 2 samples per set");
  const T bw = base ? *base : median_bandwidth<T>(ze, zi);
  const T w_within = T(1) / static_cast<T>(M * (M - 1));
  const T w_cross = T(2) / static_cast<T>(M * M);

  PairLoss<T> out;
  out.d_ze = Mat<T>::Zero(M, ze.cols());
  out.d_zi = Mat<T>::Zero(M, zi.cols());

  auto within = [&](const Mat<T>& z, Mat<T>& dz) {
    T sum = T(0);
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index j = 0; j < M; ++j) {
        if (i == j) continue;
        const RowVec<T> diff = z.row(i) - z.row(j);
        const T d2 = diff.squaredNorm();
        sum += mk_rbf(cfg, bw, d2);
        // d/dz_i of k(z_i, z_j); the (j, i) term supplies the z_j side.
        dz.row(i) += (T(2) * w_within * mk_rbf_dsq(cfg, bw, d2)) * diff;
        dz.row(j) -= (T(2) * w_within * mk_rbf_dsq(cfg, bw, d2)) * diff;
      }
    }
    return w_within * sum;
  };
  T value = within(ze, out.d_ze) + within(zi, out.d_zi);

  T cross = T(0);
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < M; ++j) {
      const RowVec<T> diff = ze.row(i) - zi.row(j);
      const T d2 = diff.squaredNorm();
      cross += mk_rbf(cfg, bw, d2);
      const RowVec<T> g = (T(2) * mk_rbf_dsq(cfg, bw, d2)) * diff;
      out.d_ze.row(i) -= w_cross * g;
      out.d_zi.row(j) += w_cross * g;
    }
  }
  out.value = value - w_cross * cross;
  return out;
}

template <typename T>
T mmd_loss(const MMDConfig& cfg, const Mat<T>& ze, const Mat<T>& zi, std::optional<T> base = std::nullopt) {
  return mmd_loss_grad(cfg, ze, zi, base).value;
}

enum class LambdaSchedule { linear, cosine };

struct StageSchedule {
  int T = 30;    // total epochs
  int T_c = 20;  // stage-1 epochs
  double lambda0 = 0.5;
  double stage2_lr_multiplier = 0.1;
  LambdaSchedule shape = LambdaSchedule::linear;

  void validate() const {
    if (!(T_c > 0 && T_c <= T)) throw std::invalid_argument("loss.t_c must satisfy 0 < t_c <= train.epochs");
    if (!(lambda0 >= 0.0 && lambda0 <= 1.0)) throw std::invalid_argument("loss.lambda0 must lie in [0, 1]");
    if (!(stage2_lr_multiplier > 0.0)) throw std::invalid_argument("train.stage2_lr_multiplier must be positive");
  }
};

// Mixing weight for 1-based epoch l: decays from lambda0 at l = 1 to 0 at
// l = T_c + 1 and stays 0 afterwards.
inline double lambda_at(const StageSchedule& s, int epoch) {
  if (epoch > s.T_c) return 0.0;
  const double t = static_cast<double>(epoch - 1) / s.T_c;
  if (s.shape == LambdaSchedule::cosine) return s.lambda0 * 0.5 * (1.0 + std::cos(M_PI * t));
  return s.lambda0 * std::max(0.0, 1.0 - t);
}

inline bool in_coarse_stage(const StageSchedule& s, int epoch) { return epoch <= s.T_c; }

inline double stage_objective(const StageSchedule& s, int epoch, double loss_ret, double loss_mmd) {
  if (!in_coarse_stage(s, epoch)) return loss_ret;
  const double lambda = lambda_at(s, epoch);
  if (lambda == 0.0) return loss_ret;
  return lambda * loss_mmd + (1.0 - lambda) * loss_ret;
}

}  // namespace samga
