#include "rulkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rulkit/random.hpp"

namespace rulkit::trainer {

namespace {

constexpr std::size_t kBatchSizes[] = {32, 64, 128, 256, 512};
constexpr double kLearningRates[] = {0.1, 0.01, 0.001, 0.0001};

void require_trainable(const dataset::FeatureSet& fs, const char* name) {
  if (fs.features.rows() == 0)
    throw std::invalid_argument(std::string("fit: ") + name + " split is empty");
  if (fs.labels.size() != fs.features.rows() || fs.sample_times.size() != fs.features.rows() ||
      fs.sample_total_runtime.size() != fs.features.rows())
    throw std::invalid_argument(std::string("fit: ") + name + " split has inconsistent row counts");
}

struct Batch {
  Matrix features;
  std::vector<double> labels;
  std::vector<double> times_true;
  std::vector<double> totals;
};

Batch gather(const dataset::FeatureSet& fs, std::span<const std::size_t> indices) {
  Batch b;
  b.features = Matrix(indices.size(), fs.features.cols());
  b.labels.reserve(indices.size());
  b.times_true.reserve(indices.size());
  b.totals.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    const auto row = fs.features.row(src);
    std::copy(row.begin(), row.end(), b.features.row(r).begin());
    b.labels.push_back(fs.labels[src]);
    b.times_true.push_back(fs.sample_times[src]);
    b.totals.push_back(fs.sample_total_runtime[src]);
  }
  return b;
}

std::vector<double> predicted_times(std::span<const double> predictions,
                                    std::span<const double> totals) {
  std::vector<double> t_hat(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) t_hat[i] = predictions[i] * totals[i];
  return t_hat;
}

struct Snapshot {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

Snapshot take_snapshot(const network::NetworkState& state) {
  return {state.weights, state.biases};
}

void restore_snapshot(network::NetworkState& state, const Snapshot& snap) {
  state.weights = snap.weights;
  state.biases = snap.biases;
}

}  // namespace

void validate_config(const TrainConfig& config) {
  if (std::find(std::begin(kBatchSizes), std::end(kBatchSizes), config.batch_size) ==
      std::end(kBatchSizes))
    throw std::invalid_argument("train config: batch_size " + std::to_string(config.batch_size) +
                                " is not one of {32, 64, 128, 256, 512}");
  if (std::find(std::begin(kLearningRates), std::end(kLearningRates), config.learning_rate) ==
      std::end(kLearningRates))
    throw std::invalid_argument("train config: learning_rate " +
                                std::to_string(config.learning_rate) +
                                " is not one of {0.1, 0.01, 0.001, 0.0001}");
  if (config.max_epochs == 0) throw std::invalid_argument("train config: max_epochs must be positive");
  if (config.patience == 0) throw std::invalid_argument("train config: patience must be positive");
  losses::validate_spec(config.loss);
}

double dataset_loss(const network::NetworkState& state, const dataset::FeatureSet& fs,
                    const losses::LossSpec& loss) {
  const std::vector<double> predictions = network::predict(state, fs.features);
  const std::vector<double> t_hat = predicted_times(predictions, fs.sample_total_runtime);
  return losses::loss_value(loss, fs.labels, predictions, fs.sample_times, t_hat);
}

Metrics evaluate(const network::NetworkState& state, const dataset::FeatureSet& fs) {
  require_trainable(fs, "evaluated");
  const std::vector<double> predictions = network::predict(state, fs.features);
  Metrics m;
  m.mse = losses::mse(fs.labels, predictions);
  m.rmse = std::sqrt(m.mse);
  m.rmsle = losses::rmsle(fs.labels, predictions);

  const double n = static_cast<double>(fs.labels.size());
  const double mean = std::accumulate(fs.labels.begin(), fs.labels.end(), 0.0) / n;
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < fs.labels.size(); ++i) {
    ss_tot += (fs.labels[i] - mean) * (fs.labels[i] - mean);
    ss_res += (fs.labels[i] - predictions[i]) * (fs.labels[i] - predictions[i]);
  }
  if (ss_tot == 0.0) {
    m.r2 = std::numeric_limits<double>::quiet_NaN();
    m.r2_defined = false;
  } else {
    m.r2 = 1.0 - ss_res / ss_tot;
  }
  return m;
}

FitResult fit(network::NetworkState state, const dataset::FeatureSet& train,
              const dataset::FeatureSet& validation, const TrainConfig& config) {
  validate_config(config);
  require_trainable(train, "train");
  require_trainable(validation, "validation");

  FitResult result;
  Rng rng(config.seed);
  std::vector<std::size_t> order(train.features.rows());
  std::iota(order.begin(), order.end(), 0);

  Snapshot best = take_snapshot(state);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t bad_epochs = 0;
  std::size_t steps = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_portable(order, rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const Batch batch = gather(train, {order.data() + start, len});

      network::ForwardCache cache =
          network::forward(state, batch.features, network::Mode::train, &rng);
      const std::vector<double> t_hat = predicted_times(cache.predictions, batch.totals);
      double batch_loss = losses::loss_value(config.loss, batch.labels, cache.predictions,
                                             batch.times_true, t_hat);
      ++steps;
      if (config.inject_nonfinite_after_step != 0 && steps >= config.inject_nonfinite_after_step)
        batch_loss = std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(batch_loss)) {
        result.diverged = true;
        break;
      }
      const losses::LossGradient grad = losses::loss_gradient(
          config.loss, batch.labels, cache.predictions, batch.times_true, t_hat, batch.totals);
      network::adam_step(state, network::backward(state, cache, grad.wrt_predictions),
                         config.learning_rate);
    }
    if (result.diverged) break;

    const double train_loss = dataset_loss(state, train, config.loss);
    const double val_loss = dataset_loss(state, validation, config.loss);
    result.train_curve.push_back(train_loss);
    result.validation_curve.push_back(val_loss);
    result.epochs_run = epoch;
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      result.diverged = true;
      break;
    }

    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = take_snapshot(state);
      best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }

  if (!result.diverged && best_epoch > 0) {
    restore_snapshot(state, best);
    result.stop_epoch = best_epoch;
  }
  result.state = std::move(state);
  return result;
}

}  // namespace rulkit::trainer
