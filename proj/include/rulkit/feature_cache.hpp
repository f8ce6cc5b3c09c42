#pragma once

#include <cstdint>
#include <filesystem>

#include "rulkit/dataset.hpp"

namespace rulkit::dataset {

// Cached model-ready rows plus everything downstream needs to interpret
// them: scaler statistics, the fitted Weibull parameters, and the manifest
// hash they were produced under. Failure records are not cached; they are
// re-derived from the runs when needed.
struct CachedFeatures {
  FeatureSet train;
  FeatureSet validation;
  FeatureSet test;
  MinMaxScaler scaler;
  std::size_t bin_count = 0;
  double beta = 0.0;
  double eta = 0.0;
  std::uint64_t manifest_hash = 0;
};

// Tab-separated rows under '#' header lines; all numbers shortest
// round-trip, and a content hash over the data rows guards against
// truncation or edits.
void save_features(const std::filesystem::path& path, const CachedFeatures& cache);
CachedFeatures load_features(const std::filesystem::path& path);

// Normalized on-disk form of one run: header lines, then one window per
// row (time followed by samples). Same round-trip guarantees as the
// feature cache.
void save_run(const std::filesystem::path& path, const Run& run, std::uint64_t manifest_hash);
struct LoadedRun {
  Run run;
  std::uint64_t manifest_hash = 0;
};
LoadedRun load_run(const std::filesystem::path& path);

}  // namespace rulkit::dataset
