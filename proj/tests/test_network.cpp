#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rulkit/network.hpp"

using namespace rulkit;
using namespace rulkit::network;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = normal_unit(rng);
  return m;
}

NetworkArchitecture small_arch() {
  NetworkArchitecture arch;
  arch.input_dim = 3;
  arch.hidden_layers = 2;
  arch.units_per_layer = 4;
  arch.dropout_prob = 0.0;
  return arch;
}

// Scalar objective sum_i c_i * prediction_i; its gradient is c itself.
double weighted_sum(const NetworkState& state, const Matrix& batch,
                    const std::vector<double>& c) {
  const std::vector<double> preds = predict(state, batch);
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += c[i] * preds[i];
  return sum;
}

}  // namespace

TEST_CASE("an all-zero network predicts one half everywhere") {
  NetworkState state = init_network(small_arch(), 1);
  for (auto& w : state.weights)
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) w(r, c) = 0.0;
  for (const double p : predict(state, random_batch(5, 3, 2))) CHECK(p == 0.5);
}

TEST_CASE("initialization is seed-deterministic with fan-in-scaled spread") {
  NetworkArchitecture arch;
  arch.input_dim = 256;
  arch.hidden_layers = 1;
  arch.units_per_layer = 256;
  const NetworkState a = init_network(arch, 42);
  const NetworkState b = init_network(arch, 42);
  const NetworkState c = init_network(arch, 43);
  CHECK(a.weights[0].data() == b.weights[0].data());
  CHECK(a.weights[0].data() != c.weights[0].data());
  for (const auto& bias_layer : a.biases)
    for (const double v : bias_layer) CHECK(v == 0.0);

  // first layer: variance should track 2 / fan_in
  double mean = 0.0;
  double sq = 0.0;
  const std::size_t n = a.weights[0].rows() * a.weights[0].cols();
  for (std::size_t r = 0; r < a.weights[0].rows(); ++r)
    for (std::size_t col = 0; col < a.weights[0].cols(); ++col) {
      mean += a.weights[0](r, col);
      sq += a.weights[0](r, col) * a.weights[0](r, col);
    }
  mean /= static_cast<double>(n);
  const double variance = sq / static_cast<double>(n) - mean * mean;
  const double expected = 2.0 / 256.0;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(expected / static_cast<double>(n)));
  CHECK(variance == doctest::Approx(expected).epsilon(0.2));
}

TEST_CASE("inverted dropout preserves hidden activations in expectation") {
  NetworkArchitecture arch;
  arch.input_dim = 8;
  arch.hidden_layers = 1;
  arch.units_per_layer = 16;
  arch.dropout_prob = 0.4;
  const NetworkState state = init_network(arch, 5);
  const Matrix batch = random_batch(1, 8, 6);

  const ForwardCache eval_pass = forward(state, batch, Mode::eval);
  Rng rng(99);
  std::vector<double> sums(16, 0.0);
  std::size_t kept = 0;
  std::size_t mask_count = 0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const ForwardCache train_pass = forward(state, batch, Mode::train, &rng);
    for (std::size_t j = 0; j < 16; ++j) sums[j] += train_pass.layer_inputs[1](0, j);
    for (std::size_t j = 0; j < 16; ++j) {
      const double m = train_pass.dropout_masks[0](0, j);
      CHECK((m == 0.0 || m == doctest::Approx(1.0 / 0.6).epsilon(1e-12)));
      if (m != 0.0) ++kept;
      ++mask_count;
    }
  }
  CHECK(static_cast<double>(kept) / static_cast<double>(mask_count) ==
        doctest::Approx(0.6).epsilon(0.02));
  for (std::size_t j = 0; j < 16; ++j) {
    const double eval_h = eval_pass.layer_inputs[1](0, j);
    if (eval_h > 0.05)
      CHECK(sums[j] / draws == doctest::Approx(eval_h).epsilon(0.05));
  }
}

TEST_CASE("dropout probability zero makes train and eval passes identical") {
  const NetworkState state = init_network(small_arch(), 11);
  const Matrix batch = random_batch(7, 3, 12);
  Rng rng(1);
  const ForwardCache train_pass = forward(state, batch, Mode::train, &rng);
  const ForwardCache eval_pass = forward(state, batch, Mode::eval);
  CHECK(train_pass.predictions == eval_pass.predictions);
}

TEST_CASE("backward gradients agree with central differences on every parameter") {
  NetworkState state = init_network(small_arch(), 21);
  // zero biases can park a whole layer exactly on the ReLU kink (a dead input
  // row gives z = bias = 0), where two-sided differences measure an average
  // slope the subgradient convention rightly ignores; nudge off the kink
  for (std::size_t l = 0; l < state.biases.size(); ++l)
    for (std::size_t j = 0; j < state.biases[l].size(); ++j)
      state.biases[l][j] = 0.01 * static_cast<double>(j + 1) + 0.003 * static_cast<double>(l);
  const Matrix batch = random_batch(5, 3, 22);
  std::vector<double> c;
  {
    Rng rng(23);
    for (int i = 0; i < 5; ++i) c.push_back(normal_unit(rng));
  }
  const ForwardCache cache = forward(state, batch, Mode::eval);
  const Gradients grads = backward(state, cache, c);

  const double h = 1e-6;
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    for (std::size_t r = 0; r < state.weights[l].rows(); ++r)
      for (std::size_t col = 0; col < state.weights[l].cols(); ++col) {
        NetworkState hi = state;
        hi.weights[l](r, col) += h;
        NetworkState lo = state;
        lo.weights[l](r, col) -= h;
        const double fd = (weighted_sum(hi, batch, c) - weighted_sum(lo, batch, c)) / (2.0 * h);
        CHECK(grads.weights[l](r, col) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
    for (std::size_t j = 0; j < state.biases[l].size(); ++j) {
      NetworkState hi = state;
      hi.biases[l][j] += h;
      NetworkState lo = state;
      lo.biases[l][j] -= h;
      const double fd = (weighted_sum(hi, batch, c) - weighted_sum(lo, batch, c)) / (2.0 * h);
      CHECK(grads.biases[l][j] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("backward respects dropout masks") {
  NetworkArchitecture arch = small_arch();
  arch.dropout_prob = 0.5;
  const NetworkState state = init_network(arch, 31);
  const Matrix batch = random_batch(4, 3, 32);
  Rng rng(33);
  const ForwardCache cache = forward(state, batch, Mode::train, &rng);
  const Gradients grads = backward(state, cache, std::vector<double>{1.0, 1.0, 1.0, 1.0});
  REQUIRE(grads.weights.size() == state.weights.size());
  // a fully dropped unit contributes no gradient to its incoming weights
  for (std::size_t j = 0; j < arch.units_per_layer; ++j) {
    bool all_dropped = true;
    for (std::size_t r = 0; r < 4; ++r)
      if (cache.dropout_masks[1](r, j) != 0.0) all_dropped = false;
    if (all_dropped)
      for (std::size_t col = 0; col < arch.units_per_layer; ++col)
        CHECK(grads.weights[1](j, col) == 0.0);
  }
}

TEST_CASE("the first adam step moves each weight by minus lr times the gradient sign") {
  NetworkState state = init_network(small_arch(), 41);
  const NetworkState before = state;
  Gradients grads;
  Rng rng(42);
  for (const auto& w : state.weights) {
    Matrix g(w.rows(), w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) g(r, c) = normal_unit(rng) + 0.01;
    grads.weights.push_back(std::move(g));
  }
  for (const auto& b : state.biases) {
    std::vector<double> g(b.size());
    for (double& v : g) v = normal_unit(rng) + 0.01;
    grads.biases.push_back(std::move(g));
  }
  adam_step(state, grads, 0.01);
  CHECK(state.adam_step_count == 1);
  for (std::size_t l = 0; l < state.weights.size(); ++l)
    for (std::size_t r = 0; r < state.weights[l].rows(); ++r)
      for (std::size_t c = 0; c < state.weights[l].cols(); ++c) {
        const double g = grads.weights[l](r, c);
        if (std::abs(g) < 1e-4) continue;
        const double delta = state.weights[l](r, c) - before.weights[l](r, c);
        CHECK(delta == doctest::Approx(-0.01 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-3));
      }
}

TEST_CASE("checkpoints round-trip parameters bit for bit and drop moments") {
  const auto path = std::filesystem::temp_directory_path() / "rulkit-test-ckpt.json";
  NetworkState state = init_network(small_arch(), 51);
  // perturb so the file is not a fresh init, and advance the optimizer
  Gradients grads;
  for (const auto& w : state.weights) {
    Matrix g(w.rows(), w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) g(r, c) = 0.1;
    grads.weights.push_back(std::move(g));
  }
  for (const auto& b : state.biases) grads.biases.push_back(std::vector<double>(b.size(), 0.1));
  adam_step(state, grads, 0.001);

  CheckpointMeta meta;
  meta.beta = 2.0;
  meta.eta = 83.1000000000000227;
  meta.scaler_min = {0.1, -3.7, 0.0};
  meta.scaler_max = {1.1, 2.2, 9.9};
  meta.trial_seed = 777;
  meta.manifest_hash = 0xdeadbeefcafef00dULL;
  meta.loss_kind = "W-RMSE-Comb";
  meta.lambda = 1.25;
  save_checkpoint(path, state, meta);

  const auto [loaded, loaded_meta] = load_checkpoint(path);
  CHECK(loaded.arch.input_dim == state.arch.input_dim);
  CHECK(loaded.arch.hidden_layers == state.arch.hidden_layers);
  for (std::size_t l = 0; l < state.weights.size(); ++l) {
    CHECK(loaded.weights[l].data() == state.weights[l].data());
    CHECK(loaded.biases[l] == state.biases[l]);
  }
  CHECK(loaded.adam_step_count == 0);
  for (const auto& m : loaded.m_weights)
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) CHECK(m(r, c) == 0.0);
  CHECK(loaded_meta.beta == meta.beta);
  CHECK(loaded_meta.eta == meta.eta);
  CHECK(loaded_meta.scaler_min == meta.scaler_min);
  CHECK(loaded_meta.scaler_max == meta.scaler_max);
  CHECK(loaded_meta.trial_seed == meta.trial_seed);
  CHECK(loaded_meta.manifest_hash == meta.manifest_hash);
  CHECK(loaded_meta.loss_kind == meta.loss_kind);
  CHECK(loaded_meta.lambda == meta.lambda);

  const Matrix batch = random_batch(6, 3, 52);
  CHECK(predict(loaded, batch) == predict(state, batch));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects malformed files") {
  const auto path = std::filesystem::temp_directory_path() / "rulkit-test-badckpt.json";
  {
    std::ofstream out(path);
    out << "{\"format\": \"something-else\"}";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "not json";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}

TEST_CASE("architecture and forward validation") {
  NetworkArchitecture arch = small_arch();
  arch.input_dim = 0;
  CHECK_THROWS_AS(validate_architecture(arch), std::invalid_argument);
  arch = small_arch();
  arch.hidden_layers = 0;
  CHECK_THROWS_AS(validate_architecture(arch), std::invalid_argument);
  arch = small_arch();
  arch.dropout_prob = 1.0;
  CHECK_THROWS_AS(validate_architecture(arch), std::invalid_argument);

  const NetworkState state = init_network(small_arch(), 61);
  CHECK_THROWS_AS(forward(state, random_batch(2, 5, 62), Mode::eval), std::invalid_argument);
  NetworkArchitecture dropout_arch = small_arch();
  dropout_arch.dropout_prob = 0.5;
  const NetworkState dstate = init_network(dropout_arch, 63);
  CHECK_THROWS_AS(forward(dstate, random_batch(2, 3, 64), Mode::train, nullptr),
                  std::invalid_argument);
}
