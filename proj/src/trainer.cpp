#include "samga/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace samga {

void TrainConfig::validate() const {
  schedule.validate();
  mmd.validate();
  if (batch_size < 2) throw std::invalid_argument("train.batch_size must be at least 2");
  if (lr < 0.0) throw std::invalid_argument("train.lr must be non-negative");
  if (weight_decay < 0.0) throw std::invalid_argument("train.weight_decay must be non-negative");
  if (eval_every < 1) throw std::invalid_argument("train.eval_every must be at least 1");
}

Engine dropout_stream(std::uint64_t seed, int epoch, int trial) {
  return Engine(stream_seed(seed, "dropout", static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(trial)));
}

Trainer::Trainer(const Dataset& ds, const SplitPlan& split, TrainConfig config, ModelParams<float> init)
    : ds_(ds),
      split_(split),
      config_(std::move(config)),
      params_(std::move(init)),
      opt_(OptimizerState<float>::like(params_)),
      shuffle_(make_engine(config_.seed, "shuffle")) {
  config_.validate();
  require_dims(params_.spec.K() == ds_.manifest.K(), "model K differs from dataset K");
  require_dims(params_.spec.signal_dim == ds_.manifest.signal_dim(), "model signal width differs from dataset");
  require_dims(params_.spec.subjects == ds_.manifest.S, "model subject count differs from dataset");
}

Trainer::Trainer(const Dataset& ds, const SplitPlan& split, TrainConfig config, Checkpoint resume_from)
    : Trainer(ds, split, std::move(config), std::move(resume_from.params)) {
  opt_ = std::move(resume_from.optimizer);
  best_ = std::move(resume_from.best);
  progress_ = std::move(resume_from.progress);
  shuffle_ = engine_from_state(resume_from.rng_state);
}

bool Trainer::done() const {
  return progress_.stopped_early || progress_.epochs_done >= config_.schedule.T;
}

double Trainer::learning_rate(int epoch) const {
  if (!in_coarse_stage(config_.schedule, epoch) && config_.reduce_lr_in_stage2) {
    return config_.lr * config_.schedule.stage2_lr_multiplier;
  }
  return config_.lr;
}

Batch<float> Trainer::make_batch(const std::vector<int>& trials) const {
  Batch<float> b;
  const auto M = static_cast<Eigen::Index>(trials.size());
  b.eeg.resize(M, ds_.eeg.cols());
  for (const auto& layer : ds_.features) b.layers.emplace_back(M, layer.cols());
  for (Eigen::Index i = 0; i < M; ++i) {
    const TrialLabel& l = ds_.labels[trials[i]];
    b.eeg.row(i) = ds_.eeg.row(trials[i]);
    for (std::size_t k = 0; k < ds_.features.size(); ++k) b.layers[k].row(i) = ds_.features[k].row(l.image);
    b.subjects.push_back(l.subject);
  }
  return b;
}

BatchRouting<float> Trainer::draw_routing(const std::vector<int>& trials, int epoch) const {
  BatchRouting<float> routing;
  for (int n : trials) {
    Engine rng = dropout_stream(config_.seed, epoch, n);
    const RoutingDraw<float> d = route_train(params_.router, ds_.labels[n].subject, rng);
    routing.r.push_back(d.r);
    routing.masks.push_back(d.mask);
  }
  return routing;
}

EpochRecord Trainer::run_epoch() {
  if (done()) throw std::logic_error("training already finished");
  const int epoch = progress_.epochs_done + 1;
  const StageSchedule& sched = config_.schedule;
  const bool coarse = in_coarse_stage(sched, epoch);
  if (!coarse && config_.freeze_shared_in_stage2) params_.shared.frozen = true;

  EpochRecord rec;
  rec.epoch = epoch;
  rec.stage = coarse ? 1 : 2;
  rec.lambda = coarse ? lambda_at(sched, epoch) : 0.0;
  rec.lr = learning_rate(epoch);

  std::vector<int> order = split_.train;
  std::shuffle(order.begin(), order.end(), shuffle_);

  Objective<float> obj;
  obj.lambda = rec.lambda;
  obj.mmd = config_.mmd;

  const auto M = static_cast<std::size_t>(config_.batch_size);
  double sum_ret = 0, sum_mmd = 0, sum_total = 0;
  for (std::size_t start = 0; start < order.size(); start += M) {
    const std::vector<int> trials(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + M)));
    if (trials.size() < 2) {
      ++rec.skipped_batches;
      continue;
    }
    const Batch<float> batch = make_batch(trials);
    const BatchRouting<float> routing = draw_routing(trials, epoch);
    ModelParams<float> grad = params_.zeros_like();
    auto fail = [&](const std::string& what) {
      std::ostringstream msg;
      msg << what << " at epoch " << epoch << ", batch " << rec.batches;
      return NumericError(msg.str());
    };
    LossBreakdown loss;
    try {
      loss = forward_backward(params_, batch, routing, obj, &grad);
    } catch (const std::domain_error& e) {
      throw fail(e.what());
    }
    if (!std::isfinite(loss.total) || !std::isfinite(loss.ret) || !std::isfinite(loss.mmd)) throw fail("non-finite loss");
    try {
      adamw_step(params_, opt_, grad, rec.lr, config_.weight_decay);
    } catch (const NumericError& e) {
      throw fail(e.what());
    }
    sum_ret += loss.ret;
    sum_mmd += loss.mmd;
    sum_total += loss.total;
    ++rec.batches;
  }
  if (rec.batches > 0) {
    rec.loss_ret = sum_ret / rec.batches;
    rec.loss_mmd = sum_mmd / rec.batches;
    rec.loss_total = sum_total / rec.batches;
  }

  progress_.epochs_done = epoch;
  const bool can_validate = !split_.val.empty() && !split_.val_images.empty();
  if (can_validate && (epoch % config_.eval_every == 0 || epoch == sched.T)) {
    const double top1 = evaluate_retrieval(params_, ds_, split_.val, split_.val_images, {1}).top1();
    rec.val_top1 = top1;
    if (top1 > progress_.best_val_top1) {
      progress_.best_val_top1 = top1;
      progress_.best_epoch = epoch;
      progress_.evals_since_best = 0;
      best_ = params_;
    } else {
      ++progress_.evals_since_best;
      if (config_.patience > 0 && progress_.evals_since_best >= config_.patience) progress_.stopped_early = true;
    }
  }
  progress_.history.push_back(rec);
  return rec;
}

TrainResult Trainer::run(const EpochObserver& observer) {
  while (!done()) {
    const EpochRecord rec = run_epoch();
    if (observer) observer(rec, params_);
  }
  TrainResult res;
  res.last = params_;
  res.model = best_ ? *best_ : params_;
  res.progress = progress_;
  if (!best_) res.progress.best_epoch = progress_.epochs_done;
  return res;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.optimizer = opt_;
  c.best = best_;
  c.progress = progress_;
  c.rng_state = engine_state(shuffle_);
  return c;
}

TrainResult train(const Dataset& ds, const SplitPlan& split, const TrainConfig& config,
                  const ModelParams<float>& init, const EpochObserver& observer) {
  Trainer trainer(ds, split, config, init);
  return trainer.run(observer);
}

}  // namespace samga
