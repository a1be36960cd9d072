#include "chcf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "chcf/error.hpp"
#include "chcf/eval.hpp"

namespace chcf {

void TrainConfig::validate(std::size_t num_behaviors) const {
  loss.validate(num_behaviors);
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch must be at least 1");
  if (dim == 0) throw ConfigError("d must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

AdagradState init_adagrad(const CfParams& params, const CriterionParams& cp) {
  AdagradState state;
  state.cf = zero_grads(params);
  state.user_bounds = Matrix(cp.user_bounds.rows(), cp.user_bounds.cols());
  state.item_bounds = Matrix(cp.item_bounds.rows(), cp.item_bounds.cols());
  return state;
}

void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> acc,
                    double lr, double epsilon, const std::string& name) {
  if (param.size() != grad.size() || param.size() != acc.size()) {
    throw DataError("adagrad shape mismatch for " + name);
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + name);
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (g == 0.0) continue;
    acc[i] += g * g;
    param[i] -= lr * g / (std::sqrt(acc[i]) + epsilon);
  }
}

namespace {

void check_finite(std::span<const double> grad, const std::string& name, std::size_t batch) {
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NumericalError("non-finite gradient in " + name + " at batch " + std::to_string(batch));
    }
  }
}

}  // namespace

void adagrad_step(CfParams& params, CriterionParams& cp, const CfGrads& cf_grads,
                  const CriterionGrads& bound_grads, AdagradState& state, double lr,
                  BoundMode mode, std::size_t batch_index) {
  const bool learn_user = uses_user_bounds(mode);
  const bool learn_item = uses_item_bounds(mode);
  check_finite(cf_grads.users.flat(), "user embeddings", batch_index);
  check_finite(cf_grads.items.flat(), "item embeddings", batch_index);
  check_finite(cf_grads.heads.flat(), "prediction layer", batch_index);
  if (learn_user) check_finite(bound_grads.user_bounds.flat(), "user heterogeneity H", batch_index);
  if (learn_item) check_finite(bound_grads.item_bounds.flat(), "item heterogeneity G", batch_index);

  const double eps = state.epsilon;
  adagrad_update(params.users.flat(), cf_grads.users.flat(), state.cf.users.flat(), lr, eps, "P");
  adagrad_update(params.items.flat(), cf_grads.items.flat(), state.cf.items.flat(), lr, eps, "Q");
  if (!params.heads.empty()) {
    adagrad_update(params.heads.flat(), cf_grads.heads.flat(), state.cf.heads.flat(), lr, eps, "h");
  }
  if (learn_user) {
    adagrad_update(cp.user_bounds.flat(), bound_grads.user_bounds.flat(), state.user_bounds.flat(),
                   lr, eps, "H");
  }
  if (learn_item) {
    adagrad_update(cp.item_bounds.flat(), bound_grads.item_bounds.flat(), state.item_bounds.flat(),
                   lr, eps, "G");
  }
  clamp_bounds(cp);
  project_rows(params.users);
  project_rows(params.items);
}

TrainingSession::TrainingSession(const SplitDataset& split, const TrainConfig& cfg)
    : split_(split), cfg_(cfg), rng_(cfg.seed) {
  const BehaviorDataset& train = split.train;
  cfg_.validate(train.num_behaviors);
  if (cfg_.model == ModelKind::LightGCN) graph_ = std::make_unique<Propagation>(train);

  CfShape shape;
  shape.model = cfg_.model;
  shape.num_users = train.num_users;
  shape.num_items = train.num_items;
  shape.dim = cfg_.dim;
  shape.layers = cfg_.layers;
  shape.heads = cfg_.per_behavior_heads ? train.num_behaviors : 1;
  params_ = init_cf_params(shape, rng_);
  criterion_ = init_criterion(train.num_users, train.num_items, train.num_behaviors,
                              cfg_.loss.alpha, rng_);
  if (!uses_user_bounds(cfg_.loss.bound_mode)) criterion_.user_bounds.fill(1.0);
  if (!uses_item_bounds(cfg_.loss.bound_mode)) criterion_.item_bounds.fill(1.0);
  state_ = init_adagrad(params_, criterion_);

  order_.resize(train.num_users);
  std::iota(order_.begin(), order_.end(), Index{0});
}

double TrainingSession::run_epoch() {
  const BehaviorDataset& train = split_.train;
  rng_.shuffle(std::span<Index>(order_));
  const bool use_dropout = cfg_.model == ModelKind::GMF && cfg_.dropout > 0.0;
  double epoch_loss = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order_.size(); start += cfg_.batch_size, ++batch_index) {
    const std::size_t stop = std::min(order_.size(), start + cfg_.batch_size);
    const std::span<const Index> users(order_.data() + start, stop - start);

    Matrix mask;
    if (use_dropout) mask = sample_dropout_mask(users.size(), cfg_.dim, cfg_.dropout, rng_);
    const ScoreBatch batch =
        batch_scores(params_, graph_.get(), users, use_dropout ? &mask : nullptr);
    const LossResult loss = chcf_total_loss(batch, train, criterion_, cfg_.loss);
    if (!std::isfinite(loss.loss)) {
      throw NumericalError("non-finite loss at batch " + std::to_string(batch_index));
    }
    CfGrads grads = zero_grads(params_);
    backprop_scores(params_, graph_.get(), batch, loss.d_scores, grads);
    adagrad_step(params_, criterion_, grads, loss.grads, state_, cfg_.lr, cfg_.loss.bound_mode,
                 batch_index);
    epoch_loss += loss.loss;
    ++steps_;
    if (observer_) observer_(steps_, params_, criterion_);
  }
  return epoch_loss;
}

TrainResult train(const SplitDataset& split, const TrainConfig& cfg, StepObserver observer) {
  TrainingSession session(split, cfg);
  session.set_observer(std::move(observer));
  TrainResult result;
  result.params = session.params();
  result.criterion = session.criterion();

  constexpr std::size_t kMonitorCutoff = 100;
  const std::vector<std::size_t> cutoffs{kMonitorCutoff};
  double best_hr = -1.0;
  double best_ndcg = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    record.loss = session.run_epoch();
    if (!split.validation.empty()) {
      const Predictor predictor(session.params(), session.graph(), session.criterion());
      const RankingReport report = evaluate(predictor, split.train, split.validation, cutoffs);
      record.val_hr = report.hr.at(kMonitorCutoff);
      record.val_ndcg = report.ndcg.at(kMonitorCutoff);
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(record);

    const bool improved = record.val_hr > best_hr ||
                          (record.val_hr == best_hr && record.val_ndcg > best_ndcg);
    if (improved) {
      best_hr = record.val_hr;
      best_ndcg = record.val_ndcg;
      result.params = session.params();
      result.criterion = session.criterion();
      result.best_epoch = epoch;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace chcf
