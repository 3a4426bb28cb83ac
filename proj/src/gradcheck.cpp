#include "samga/gradcheck.hpp"

#include "samga/model.hpp"

#include <algorithm>
#include <cmath>

namespace samga {

bool GradcheckReport::passed() const {
  return std::none_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.status == BlockStatus::fail; });
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const GradcheckConfig& cfg) {
  ModelSpec spec;
  spec.subjects = cfg.subjects;
  spec.layer_dims.assign(static_cast<std::size_t>(cfg.layers), cfg.layer_dim);
  spec.signal_dim = cfg.signal_dim;
  spec.d_common = cfg.d_common;
  spec.d_z = cfg.d_z;
  spec.eeg_hidden_dim = cfg.eeg_hidden_dim;
  spec.projector = cfg.projector;

  RouterSettings rs;
  ModelParams<double> model = init_model<double>(spec, rs, cfg.tau_init, cfg.seed);
  model.shared.frozen = cfg.freeze_shared;

  Engine rng = make_engine(cfg.seed, "gradcheck");
  auto fill = [&](auto& m, double scale) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * gaussian<double>(rng);
  };
  // Move every parameter off its initial value so biases and router terms are
  // exercised away from zero.
  model.for_each_block([&](const ParamView<double>& v) {
    for (double& x : v.values) x += 0.3 * gaussian<double>(rng);
  });
  model.head.log_tau = std::log(cfg.tau_init);

  Batch<double> batch;
  batch.eeg.resize(cfg.batch, cfg.signal_dim);
  fill(batch.eeg, 1.0);
  for (int k = 0; k < cfg.layers; ++k) {
    batch.layers.emplace_back(cfg.batch, cfg.layer_dim);
    fill(batch.layers.back(), 1.0);
  }
  for (int n = 0; n < cfg.batch; ++n) batch.subjects.push_back(n % cfg.subjects);

  // Fixed dropout pattern: one sample drops its subject bias, one drops a layer.
  BatchRouting<double> routing = no_dropout<double>(cfg.batch, cfg.layers);
  if (cfg.batch > 1) routing.r[1] = 0;
  if (cfg.batch > 2 && cfg.layers > 1) routing.masks[2][0] = 0.0;

  Objective<double> obj;
  obj.lambda = cfg.lambda;
  obj.bandwidth = forward_backward<double>(model, batch, routing, obj, nullptr).bandwidth;

  ModelParams<double> grad = model.zeros_like();
  forward_backward(model, batch, routing, obj, &grad);

  std::vector<ParamView<double>> analytic;
  grad.for_each_block([&](const ParamView<double>& g) { analytic.push_back(g); });

  GradcheckReport report;
  std::size_t idx = 0;
  model.for_each_block([&](const ParamView<double>& p) {
    const ParamView<double>& g = analytic[idx++];
    BlockCheck check;
    check.name = p.name;
    if (p.frozen) {
      check.status = BlockStatus::skipped;
      report.blocks.push_back(check);
      return;
    }
    const bool corrupt = p.name == cfg.corrupt_block;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double orig = p.values[i];
      p.values[i] = orig + cfg.step;
      const double up = forward_backward<double>(model, batch, routing, obj, nullptr).total;
      p.values[i] = orig - cfg.step;
      const double down = forward_backward<double>(model, batch, routing, obj, nullptr).total;
      p.values[i] = orig;
      const double numeric = (up - down) / (2.0 * cfg.step);
      double a = g.values[i];
      if (corrupt) a = a * 1.01 + 1e-3;
      check.max_rel_error = std::max(check.max_rel_error, relative_error(a, numeric));
    }
    check.status = check.max_rel_error < cfg.tolerance ? BlockStatus::pass : BlockStatus::fail;
    report.blocks.push_back(check);
  });
  return report;
}

}  // namespace samga
