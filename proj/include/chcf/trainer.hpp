#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chcf/cf_models.hpp"
#include "chcf/criterion.hpp"
#include "chcf/data.hpp"
#include "chcf/rng.hpp"

namespace chcf {

struct TrainConfig {
  LossConfig loss;
  ModelKind model = ModelKind::GMF;
  std::size_t dim = 64;
  std::size_t layers = 3;  // LightGCN only
  double lr = 0.05;
  std::size_t batch_size = 512;
  std::size_t epochs = 200;
  double dropout = 0.5;  // GMF only
  std::uint64_t seed = 42;
  std::size_t patience = 10;  // 0 disables early stopping
  bool per_behavior_heads = false;

  void validate(std::size_t num_behaviors) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Per-parameter running sums of squared gradients.
struct AdagradState {
  CfGrads cf;
  Matrix user_bounds;
  Matrix item_bounds;
  double epsilon = 1e-8;
};

AdagradState init_adagrad(const CfParams& params, const CriterionParams& cp);

/// acc += g^2; param -= lr * g / (sqrt(acc) + eps). Throws NumericalError
/// naming `name` before touching anything if a gradient is not finite.
void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> acc,
                    double lr, double epsilon, const std::string& name);

/// Joint update of the scorer and the bound factors, followed by the
/// positivity clamp on H, G and the unit-ball projection on P, Q. Factors
/// that the bound mode does not use are left untouched. All gradients are
/// checked before any parameter changes.
void adagrad_step(CfParams& params, CriterionParams& cp, const CfGrads& cf_grads,
                  const CriterionGrads& bound_grads, AdagradState& state, double lr,
                  BoundMode mode, std::size_t batch_index = 0);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_hr = 0.0;    // HR@100 on the validation items
  double val_ndcg = 0.0;  // NDCG@100
  double seconds = 0.0;   // wall clock, kept out of the deterministic log
};

/// Called after every optimizer step with the step counter (1-based).
using StepObserver = std::function<void(std::size_t, const CfParams&, const CriterionParams&)>;

/// Owns every trainable parameter of one run.
class TrainingSession {
 public:
  TrainingSession(const SplitDataset& split, const TrainConfig& cfg);

  /// Shuffles users, runs ceil(|U| / B) mini-batches and returns the summed
  /// batch losses.
  double run_epoch();

  const CfParams& params() const { return params_; }
  const CriterionParams& criterion() const { return criterion_; }
  CfParams& params() { return params_; }
  CriterionParams& criterion() { return criterion_; }
  const AdagradState& optimizer() const { return state_; }
  const Propagation* graph() const { return graph_.get(); }
  std::size_t steps() const { return steps_; }

  void set_observer(StepObserver observer) { observer_ = std::move(observer); }

 private:
  const SplitDataset& split_;
  TrainConfig cfg_;
  std::unique_ptr<Propagation> graph_;
  CfParams params_;
  CriterionParams criterion_;
  AdagradState state_;
  Rng rng_;
  std::vector<Index> order_;
  std::size_t steps_ = 0;
  StepObserver observer_;
};

struct TrainResult {
  CfParams params;
  CriterionParams criterion;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

/// Runs up to cfg.epochs epochs and keeps the parameters with the best
/// validation (HR@100, NDCG@100), compared lexicographically. Stops after
/// `patience` epochs without improvement.
TrainResult train(const SplitDataset& split, const TrainConfig& cfg, StepObserver observer = {});

}  // namespace chcf
