#include "rulkit/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rulkit::dataset {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  return std::nullopt;
}

void validate_run(const Run& run) {
  if (run.id.empty()) throw std::invalid_argument("run: id must not be empty");
  if (run.windows.empty()) throw std::invalid_argument("run " + run.id + ": no windows");
  if (run.windows.size() != run.times.size())
    throw std::invalid_argument("run " + run.id + ": " + std::to_string(run.windows.size()) +
                                " windows but " + std::to_string(run.times.size()) + " times");
  if (!(run.total_runtime > 0.0))
    throw std::invalid_argument("run " + run.id + ": total_runtime must be positive");
  double prev = -1.0;
  for (const double t : run.times) {
    if (!std::isfinite(t) || t < 0.0)
      throw std::invalid_argument("run " + run.id + ": window times must be finite and >= 0");
    if (t <= prev)
      throw std::invalid_argument("run " + run.id + ": window times must be strictly increasing");
    prev = t;
  }
  if (run.times.back() > run.total_runtime)
    throw std::invalid_argument("run " + run.id + ": last window time exceeds total_runtime");
}

std::vector<double> label_life_fraction(const Run& run) {
  validate_run(run);
  std::vector<double> labels;
  labels.reserve(run.times.size());
  for (const double t : run.times) labels.push_back(t / run.total_runtime);
  return labels;
}

MinMaxScaler fit_scaler(const FeatureSet& train) {
  if (train.features.rows() == 0) throw std::invalid_argument("fit_scaler: empty training set");
  const std::size_t cols = train.features.cols();
  MinMaxScaler scaler;
  scaler.col_min.assign(cols, 0.0);
  scaler.col_max.assign(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = train.features(0, c);
    double hi = lo;
    for (std::size_t r = 1; r < train.features.rows(); ++r) {
      const double v = train.features(r, c);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    scaler.col_min[c] = lo;
    scaler.col_max[c] = hi;
    if (lo == hi) scaler.degenerate_columns.push_back(c);
  }
  return scaler;
}

FeatureSet apply_scaler(const MinMaxScaler& scaler, FeatureSet fs) {
  if (scaler.col_min.size() != fs.features.cols())
    throw std::invalid_argument("apply_scaler: scaler has " +
                                std::to_string(scaler.col_min.size()) + " columns, features have " +
                                std::to_string(fs.features.cols()));
  for (std::size_t c = 0; c < fs.features.cols(); ++c) {
    const double lo = scaler.col_min[c];
    const double range = scaler.col_max[c] - lo;
    for (std::size_t r = 0; r < fs.features.rows(); ++r) {
      fs.features(r, c) = range == 0.0 ? 0.0 : (fs.features(r, c) - lo) / range;
    }
  }
  return fs;
}

namespace {

struct SplitRows {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels, times, totals;
  std::vector<std::string> run_ids;
};

FeatureSet to_feature_set(Split split, SplitRows&& acc, std::size_t bin_count) {
  FeatureSet fs;
  fs.split = split;
  fs.features = Matrix(acc.rows.size(), bin_count);
  for (std::size_t r = 0; r < acc.rows.size(); ++r)
    for (std::size_t c = 0; c < bin_count; ++c) fs.features(r, c) = acc.rows[r][c];
  fs.labels = std::move(acc.labels);
  fs.sample_times = std::move(acc.times);
  fs.sample_total_runtime = std::move(acc.totals);
  fs.run_ids = std::move(acc.run_ids);
  return fs;
}

}  // namespace

AssembledData assemble(std::span<const Run> runs, const std::map<std::string, Split>& splits,
                       std::size_t bin_count, double kaiser_shape) {
  if (runs.empty()) throw std::invalid_argument("assemble: no runs");
  if (bin_count == 0) throw std::invalid_argument("assemble: bin_count must be positive");

  AssembledData out;
  out.bin_count = bin_count;
  SplitRows acc[3];
  bool train_has_failure = false;

  for (const Run& run : runs) {
    validate_run(run);
    const auto it = splits.find(run.id);
    if (it == splits.end())
      throw std::invalid_argument("assemble: run " + run.id + " has no split assignment");
    const auto spectrogram = signal::build_spectrogram(run.windows, bin_count, kaiser_shape);
    const auto labels = label_life_fraction(run);
    SplitRows& dst = acc[static_cast<std::size_t>(it->second)];
    for (std::size_t i = 0; i < spectrogram.size(); ++i) {
      dst.rows.push_back(spectrogram[i].values);
      dst.labels.push_back(labels[i]);
      dst.times.push_back(run.times[i]);
      dst.totals.push_back(run.total_runtime);
      dst.run_ids.push_back(run.id);
    }
    if (it->second == Split::train) {
      out.failure_records.push_back({run.total_runtime, run.failed});
      train_has_failure = train_has_failure || run.failed;
    }
  }

  out.train = to_feature_set(Split::train, std::move(acc[0]), bin_count);
  out.validation = to_feature_set(Split::validation, std::move(acc[1]), bin_count);
  out.test = to_feature_set(Split::test, std::move(acc[2]), bin_count);

  if (out.train.features.rows() == 0) throw std::invalid_argument("assemble: empty training split");
  if (!train_has_failure)
    throw std::invalid_argument("assemble: training split has no failed run; eta cannot be fit");

  out.scaler = fit_scaler(out.train);
  out.train = apply_scaler(out.scaler, std::move(out.train));
  out.validation = apply_scaler(out.scaler, std::move(out.validation));
  out.test = apply_scaler(out.scaler, std::move(out.test));
  return out;
}

}  // namespace rulkit::dataset
