#pragma once

#include "samga/model.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace samga {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
  ModelParams<T> m;  // first moments
  ModelParams<T> v;  // second moments
  std::int64_t step = 0;

  static OptimizerState like(const ModelParams<T>& params) {
    return OptimizerState{params.zeros_like(), params.zeros_like(), 0};
  }
};

// One AdamW update with decoupled weight decay:
//   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
// Frozen blocks are skipped entirely, moments included.
template <typename T>
void adamw_step(ModelParams<T>& params, OptimizerState<T>& state, const ModelParams<T>& grad, double lr,
                double wd, const AdamWSettings& s = {}) {
  std::vector<ParamView<const T>> grads;
  grad.for_each_block([&](const ParamView<const T>& g) { grads.push_back(g); });
  std::vector<ParamView<T>> ms, vs;
  state.m.for_each_block([&](const ParamView<T>& b) { ms.push_back(b); });
  state.v.for_each_block([&](const ParamView<T>& b) { vs.push_back(b); });

  for (const auto& g : grads) {
    for (T x : g.values) {
      if (!std::isfinite(static_cast<double>(x))) throw NumericError("non-finite gradient in block " + g.name);
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  std::size_t idx = 0;
  params.for_each_block([&](const ParamView<T>& p) {
    const auto& g = grads[idx];
    auto& m = ms[idx];
    auto& v = vs[idx];
    ++idx;
    if (g.values.size() != p.values.size() || m.values.size() != p.values.size()) {
      throw DimensionError("gradient/moment shape mismatch for block " + p.name);
    }
    if (p.frozen) return;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double gi = static_cast<double>(g.values[i]);
      const double mi = s.beta1 * static_cast<double>(m.values[i]) + (1.0 - s.beta1) * gi;
      const double vi = s.beta2 * static_cast<double>(v.values[i]) + (1.0 - s.beta2) * gi * gi;
      m.values[i] = static_cast<T>(mi);
      v.values[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      const double theta = static_cast<double>(p.values[i]);
      p.values[i] = static_cast<T>(theta - lr * (m_hat / (std::sqrt(v_hat) + s.eps) + wd * theta));
    }
  });
}

}  // namespace samga
