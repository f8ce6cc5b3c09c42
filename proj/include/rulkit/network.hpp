#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rulkit/matrix.hpp"
#include "rulkit/random.hpp"

namespace rulkit::network {

// Fully connected regressor: `hidden_layers` blocks of affine -> ReLU ->
// dropout, then a single-unit affine -> sigmoid head, so predictions are
// life fractions in (0, 1).
struct NetworkArchitecture {
  std::size_t input_dim = 20;
  std::size_t hidden_layers = 2;
  std::size_t units_per_layer = 16;
  double dropout_prob = 0.0;  // in [0, 1)
};

void validate_architecture(const NetworkArchitecture& arch);

// Weights, biases, and ADAM moments. weights[l] has one row per output unit.
struct NetworkState {
  NetworkArchitecture arch;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  std::uint64_t adam_step_count = 0;
};

// Fan-in-scaled normal init (std sqrt(2/fan_in)), zero biases; bit-identical
// for a given seed.
NetworkState init_network(const NetworkArchitecture& arch, std::uint64_t seed);

enum class Mode { train, eval };

// Everything backward needs: each layer's input (post-dropout activations),
// the dropout masks, and the sigmoid outputs.
struct ForwardCache {
  Mode mode = Mode::eval;
  std::vector<Matrix> layer_inputs;  // [0] = batch, then hidden activations
  std::vector<Matrix> dropout_masks; // train mode only; values 0 or 1/(1-p)
  std::vector<double> predictions;
};

// Train mode draws fresh inverted-dropout masks from `rng` (keep probability
// 1-p, kept units scaled by 1/(1-p)); eval mode applies no dropout.
ForwardCache forward(const NetworkState& state, const Matrix& batch, Mode mode,
                     Rng* rng = nullptr);

std::vector<double> predict(const NetworkState& state, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

// Backprop of dL/dpredictions through the cached forward pass.
Gradients backward(const NetworkState& state, const ForwardCache& cache,
                   std::span<const double> loss_grad_wrt_predictions);

// One ADAM update with the usual constants (0.9, 0.999, 1e-8) and bias
// correction.
void adam_step(NetworkState& state, const Gradients& grads, double learning_rate);

// Self-describing JSON checkpoint: architecture, parameters, the fitted
// Weibull law, scaler statistics, and the trial seed. Parameters round-trip
// bit-exactly; optimizer moments are deliberately not persisted.
struct CheckpointMeta {
  double beta = 0.0;
  double eta = 0.0;
  std::vector<double> scaler_min, scaler_max;
  std::uint64_t trial_seed = 0;
  std::uint64_t manifest_hash = 0;
  std::string loss_kind;
  double lambda = 0.0;
};

void save_checkpoint(const std::filesystem::path& path, const NetworkState& state,
                     const CheckpointMeta& meta);
std::pair<NetworkState, CheckpointMeta> load_checkpoint(const std::filesystem::path& path);

}  // namespace rulkit::network
