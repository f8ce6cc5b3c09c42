#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rulkit/matrix.hpp"
#include "rulkit/signal.hpp"
#include "rulkit/weibull.hpp"

namespace rulkit::dataset {

enum class Split { train, validation, test };

std::string_view split_name(Split split);
std::optional<Split> split_from_name(std::string_view name);

// One bearing's life: vibration windows sampled at known times, observed up
// to total_runtime. failed == false means the run was censored (still alive
// when observation stopped).
struct Run {
  std::string id;
  std::vector<signal::RawWindow> windows;
  std::vector<double> times;  // strictly increasing, one per window
  double total_runtime = 0.0;
  bool failed = true;
};

void validate_run(const Run& run);

// Fraction of total life elapsed at each window: t_i / t_N, in [0, 1].
std::vector<double> label_life_fraction(const Run& run);

// Model-ready rows for one split. sample_total_runtime carries each row's
// t_N so predicted fractions can be mapped back to absolute times.
struct FeatureSet {
  Split split = Split::train;
  Matrix features;
  std::vector<double> labels;
  std::vector<double> sample_times;
  std::vector<double> sample_total_runtime;
  std::vector<std::string> run_ids;
};

// Per-column min/max learned from the training split only. Columns that are
// constant in training map to 0 and are listed in degenerate_columns.
struct MinMaxScaler {
  std::vector<double> col_min;
  std::vector<double> col_max;
  std::vector<std::size_t> degenerate_columns;
};

MinMaxScaler fit_scaler(const FeatureSet& train);

// (x - min) / (max - min) per column, unclamped, so validation/test values
// outside the training range land outside [0, 1].
FeatureSet apply_scaler(const MinMaxScaler& scaler, FeatureSet fs);

struct AssembledData {
  FeatureSet train;
  FeatureSet validation;
  FeatureSet test;
  MinMaxScaler scaler;
  // Built from training runs only; censored runs contribute survival time.
  std::vector<weibull::FailureRecord> failure_records;
  std::size_t bin_count = 0;
};

// Featurizes every run (binned spectrogram rows), labels life fractions,
// splits per assignment, fits the scaler on train and applies it everywhere.
// Every run must be assigned a split and the training split must contain at
// least one failed run.
AssembledData assemble(std::span<const Run> runs, const std::map<std::string, Split>& splits,
                       std::size_t bin_count, double kaiser_shape);

}  // namespace rulkit::dataset
