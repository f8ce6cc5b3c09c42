#pragma once

#include <cstdint>
#include <vector>

#include "rulkit/dataset.hpp"
#include "rulkit/losses.hpp"
#include "rulkit/network.hpp"

namespace rulkit::trainer {

// One training run's knobs. batch_size and learning_rate are restricted to
// the search-grid values so every result stays inside the studied space.
struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;  // consecutive non-improving epochs tolerated
  losses::LossSpec loss;
  std::uint64_t seed = 0;
  // Test seam: after this many optimizer steps the batch loss is treated as
  // NaN, driving the same divergence path a genuinely non-finite loss takes.
  // 0 disables.
  std::size_t inject_nonfinite_after_step = 0;
};

void validate_config(const TrainConfig& config);

struct Metrics {
  double mse = 0.0;
  double rmse = 0.0;
  double rmsle = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;  // false when the labels are constant
};

struct FitResult {
  network::NetworkState state;  // parameters of the best-validation epoch
  std::size_t stop_epoch = 0;   // 1-based epoch the best snapshot came from
  std::size_t epochs_run = 0;
  std::vector<double> train_curve;  // eval-mode loss per epoch
  std::vector<double> validation_curve;
  bool diverged = false;
};

// Shuffled mini-batch training (the trailing partial batch is trained, not
// dropped) with ADAM, early stopping on validation loss, and best-snapshot
// restore. A non-finite loss anywhere aborts the run with diverged set
// instead of raising.
FitResult fit(network::NetworkState state, const dataset::FeatureSet& train,
              const dataset::FeatureSet& validation, const TrainConfig& config);

// Eval-mode loss over a whole feature set; what the curves record and what
// early stopping compares.
double dataset_loss(const network::NetworkState& state, const dataset::FeatureSet& fs,
                    const losses::LossSpec& loss);

// MSE / RMSE / RMSLE / R^2 of eval-mode predictions against the labels.
Metrics evaluate(const network::NetworkState& state, const dataset::FeatureSet& fs);

}  // namespace rulkit::trainer
