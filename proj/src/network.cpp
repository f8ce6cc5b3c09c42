#include "rulkit/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace rulkit::network {

namespace {

using nlohmann::json;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

std::size_t layer_count(const NetworkArchitecture& arch) { return arch.hidden_layers + 1; }

std::size_t fan_in_of(const NetworkArchitecture& arch, std::size_t layer) {
  return layer == 0 ? arch.input_dim : arch.units_per_layer;
}

std::size_t fan_out_of(const NetworkArchitecture& arch, std::size_t layer) {
  return layer == arch.hidden_layers ? 1 : arch.units_per_layer;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate_architecture(const NetworkArchitecture& arch) {
  if (arch.input_dim == 0) throw std::invalid_argument("network: input_dim must be positive");
  if (arch.hidden_layers == 0)
    throw std::invalid_argument("network: at least one hidden layer is required");
  if (arch.units_per_layer == 0)
    throw std::invalid_argument("network: units_per_layer must be positive");
  if (!(arch.dropout_prob >= 0.0) || arch.dropout_prob >= 1.0)
    throw std::invalid_argument("network: dropout_prob must lie in [0, 1)");
}

NetworkState init_network(const NetworkArchitecture& arch, std::uint64_t seed) {
  validate_architecture(arch);
  NetworkState state;
  state.arch = arch;
  Rng rng(seed);
  for (std::size_t l = 0; l < layer_count(arch); ++l) {
    const std::size_t fan_in = fan_in_of(arch, l);
    const std::size_t fan_out = fan_out_of(arch, l);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data()) v = stddev * normal_unit(rng);
    state.weights.push_back(std::move(w));
    state.biases.emplace_back(fan_out, 0.0);
    state.m_weights.emplace_back(fan_out, fan_in);
    state.v_weights.emplace_back(fan_out, fan_in);
    state.m_biases.emplace_back(fan_out, 0.0);
    state.v_biases.emplace_back(fan_out, 0.0);
  }
  return state;
}

ForwardCache forward(const NetworkState& state, const Matrix& batch, Mode mode, Rng* rng) {
  if (batch.cols() != state.arch.input_dim)
    throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                " features, network expects " +
                                std::to_string(state.arch.input_dim));
  if (batch.rows() == 0) throw std::invalid_argument("forward: empty batch");
  const bool dropout_active = mode == Mode::train && state.arch.dropout_prob > 0.0;
  if (dropout_active && rng == nullptr)
    throw std::invalid_argument("forward: train mode with dropout needs an RNG");

  ForwardCache cache;
  cache.mode = mode;
  cache.layer_inputs.reserve(state.arch.hidden_layers + 1);
  cache.layer_inputs.push_back(batch);

  const double keep = 1.0 - state.arch.dropout_prob;
  const std::size_t rows = batch.rows();

  for (std::size_t l = 0; l < state.arch.hidden_layers; ++l) {
    const Matrix& w = state.weights[l];
    const std::vector<double>& b = state.biases[l];
    const Matrix& x = cache.layer_inputs.back();
    Matrix h(rows, w.rows());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto xr = x.row(r);
      for (std::size_t o = 0; o < w.rows(); ++o) {
        const auto wr = w.row(o);
        double z = b[o];
        for (std::size_t i = 0; i < wr.size(); ++i) z += wr[i] * xr[i];
        h(r, o) = z > 0.0 ? z : 0.0;  // ReLU
      }
    }
    if (dropout_active) {
      Matrix mask(rows, w.rows());
      for (double& m : mask.data()) m = uniform_unit(*rng) < keep ? 1.0 / keep : 0.0;
      for (std::size_t i = 0; i < h.data().size(); ++i) h.data()[i] *= mask.data()[i];
      cache.dropout_masks.push_back(std::move(mask));
    }
    cache.layer_inputs.push_back(std::move(h));
  }

  const Matrix& w_out = state.weights.back();
  const std::vector<double>& b_out = state.biases.back();
  const Matrix& last = cache.layer_inputs.back();
  cache.predictions.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto xr = last.row(r);
    const auto wr = w_out.row(0);
    double z = b_out[0];
    for (std::size_t i = 0; i < wr.size(); ++i) z += wr[i] * xr[i];
    cache.predictions[r] = sigmoid(z);
  }
  return cache;
}

std::vector<double> predict(const NetworkState& state, const Matrix& batch) {
  return forward(state, batch, Mode::eval).predictions;
}

Gradients backward(const NetworkState& state, const ForwardCache& cache,
                   std::span<const double> loss_grad_wrt_predictions) {
  const std::size_t layers = state.weights.size();
  if (cache.layer_inputs.size() != layers)
    throw std::invalid_argument("backward: cache does not match this network");
  const std::size_t rows = cache.layer_inputs.front().rows();
  if (loss_grad_wrt_predictions.size() != rows)
    throw std::invalid_argument("backward: gradient size " +
                                std::to_string(loss_grad_wrt_predictions.size()) +
                                " does not match batch size " + std::to_string(rows));
  const bool dropout_active = cache.mode == Mode::train && state.arch.dropout_prob > 0.0;
  if (dropout_active && cache.dropout_masks.size() != state.arch.hidden_layers)
    throw std::invalid_argument("backward: cache is missing dropout masks");

  Gradients grads;
  grads.weights.reserve(layers);
  grads.biases.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    grads.weights.emplace_back(state.weights[l].rows(), state.weights[l].cols());
    grads.biases.emplace_back(state.biases[l].size(), 0.0);
  }

  // Output head: dL/dz = dL/dy_hat * sigmoid'(z), with sigmoid' = y(1-y).
  Matrix delta(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = cache.predictions[r];
    delta(r, 0) = loss_grad_wrt_predictions[r] * y * (1.0 - y);
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& x = cache.layer_inputs[l];
    Matrix& dw = grads.weights[l];
    std::vector<double>& db = grads.biases[l];
    const std::size_t units = dw.rows();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto xr = x.row(r);
      for (std::size_t o = 0; o < units; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        db[o] += d;
        auto dwr = dw.row(o);
        for (std::size_t i = 0; i < xr.size(); ++i) dwr[i] += d * xr[i];
      }
    }
    if (l == 0) break;

    // Pass the error to the previous hidden layer. The stored activation is
    // post-dropout; where the mask kept a unit, h > 0 iff the pre-ReLU value
    // was positive, and where it dropped one, the mask factor zeroes the
    // path anyway.
    const Matrix& w = state.weights[l];
    Matrix next(rows, w.cols(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      auto nr = next.row(r);
      for (std::size_t o = 0; o < units; ++o) {
        const double d = delta(r, o);
        if (d == 0.0) continue;
        const auto wr = w.row(o);
        for (std::size_t i = 0; i < wr.size(); ++i) nr[i] += d * wr[i];
      }
      const auto hr = x.row(r);
      for (std::size_t i = 0; i < nr.size(); ++i) {
        double g = hr[i] > 0.0 ? nr[i] : 0.0;
        if (dropout_active) g *= cache.dropout_masks[l - 1](r, i);
        nr[i] = g;
      }
    }
    delta = std::move(next);
  }
  return grads;
}

void adam_step(NetworkState& state, const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam_step: learning_rate must be positive");
  if (grads.weights.size() != state.weights.size())
    throw std::invalid_argument("adam_step: gradient layer count mismatch");

  state.adam_step_count += 1;
  const double t = static_cast<double>(state.adam_step_count);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);

  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    if (!grads.weights[l].same_shape(state.weights[l]))
      throw std::invalid_argument("adam_step: gradient shape mismatch at layer " + std::to_string(l));
    auto& w = state.weights[l].data();
    auto& m = state.m_weights[l].data();
    auto& v = state.v_weights[l].data();
    const auto& g = grads.weights[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      w[i] -= learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEpsilon);
    }
    auto& b = state.biases[l];
    auto& mb = state.m_biases[l];
    auto& vb = state.v_biases[l];
    const auto& gb = grads.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      mb[i] = kAdamBeta1 * mb[i] + (1.0 - kAdamBeta1) * gb[i];
      vb[i] = kAdamBeta2 * vb[i] + (1.0 - kAdamBeta2) * gb[i] * gb[i];
      b[i] -= learning_rate * (mb[i] / bc1) / (std::sqrt(vb[i] / bc2) + kAdamEpsilon);
    }
  }
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("checkpoint: malformed weight matrix");
  Matrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (j[r].size() != m.cols()) throw std::runtime_error("checkpoint: ragged weight matrix");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkState& state,
                     const CheckpointMeta& meta) {
  json j;
  j["format"] = "rulkit-checkpoint-v1";
  j["architecture"] = {{"input_dim", state.arch.input_dim},
                       {"hidden_layers", state.arch.hidden_layers},
                       {"units_per_layer", state.arch.units_per_layer},
                       {"dropout_prob", state.arch.dropout_prob}};
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    weights.push_back(matrix_to_json(state.weights[l]));
    biases.push_back(state.biases[l]);
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["weibull"] = {{"beta", meta.beta}, {"eta", meta.eta}};
  j["scaler"] = {{"min", meta.scaler_min}, {"max", meta.scaler_max}};
  j["trial_seed"] = meta.trial_seed;
  j["manifest_hash"] = meta.manifest_hash;
  j["loss_kind"] = meta.loss_kind;
  j["lambda"] = meta.lambda;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

std::pair<NetworkState, CheckpointMeta> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != std::string("rulkit-checkpoint-v1"))
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint");

  NetworkArchitecture arch;
  arch.input_dim = j.at("architecture").at("input_dim").get<std::size_t>();
  arch.hidden_layers = j.at("architecture").at("hidden_layers").get<std::size_t>();
  arch.units_per_layer = j.at("architecture").at("units_per_layer").get<std::size_t>();
  arch.dropout_prob = j.at("architecture").at("dropout_prob").get<double>();

  NetworkState state = init_network(arch, 0);
  const json& weights = j.at("weights");
  const json& biases = j.at("biases");
  if (weights.size() != state.weights.size() || biases.size() != state.biases.size())
    throw std::runtime_error("load_checkpoint: layer count does not match the architecture");
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    Matrix w = matrix_from_json(weights[l]);
    if (!w.same_shape(state.weights[l]))
      throw std::runtime_error("load_checkpoint: weight shape mismatch at layer " +
                               std::to_string(l));
    state.weights[l] = std::move(w);
    state.biases[l] = biases[l].get<std::vector<double>>();
    if (state.biases[l].size() != state.weights[l].rows())
      throw std::runtime_error("load_checkpoint: bias shape mismatch at layer " + std::to_string(l));
    // reloaded models are for inference; moments restart clean
    state.m_weights[l] = Matrix(state.weights[l].rows(), state.weights[l].cols());
    state.v_weights[l] = Matrix(state.weights[l].rows(), state.weights[l].cols());
  }
  state.adam_step_count = 0;

  CheckpointMeta meta;
  meta.beta = j.at("weibull").at("beta").get<double>();
  meta.eta = j.at("weibull").at("eta").get<double>();
  meta.scaler_min = j.at("scaler").at("min").get<std::vector<double>>();
  meta.scaler_max = j.at("scaler").at("max").get<std::vector<double>>();
  meta.trial_seed = j.at("trial_seed").get<std::uint64_t>();
  meta.manifest_hash = j.at("manifest_hash").get<std::uint64_t>();
  meta.loss_kind = j.value("loss_kind", "");
  meta.lambda = j.value("lambda", 0.0);
  return {std::move(state), meta};
}

}  // namespace rulkit::network
