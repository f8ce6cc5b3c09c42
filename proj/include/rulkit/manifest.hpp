#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rulkit/ingest.hpp"
#include "rulkit/losses.hpp"
#include "rulkit/search.hpp"
#include "rulkit/synth.hpp"

namespace rulkit::cli {

// One raw data source for real-dataset mode.
struct RunSource {
  std::string id;
  std::string path;
  dataset::IngestFormat format = dataset::IngestFormat::ims;
  std::size_t channel = 0;
  double sample_rate = 20480.0;
  dataset::Split split = dataset::Split::train;
  bool failed = true;
};

enum class DataMode { synth, real };

// Single-model training section (the `train` subcommand).
struct TrainSection {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  std::string loss = "MSE";
  double lambda = 0.0;
  std::size_t hidden_layers = 2;
  std::size_t units = 32;
  double dropout = 0.0;
  std::uint64_t seed = 0;  // defaults to the manifest seed when absent
};

struct SearchSection {
  std::size_t architectures = 40;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  search::SearchSpace space;
};

// Parsed manifest: the experiment's entire configuration. The hash of the
// effective configuration (after CLI overrides, excluding out_dir) is
// stamped into every artifact so mixed-provenance inputs are caught.
struct Manifest {
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t bin_count = 20;
  double kaiser_shape = 14.0;
  double beta = 2.0;  // Weibull shape held fixed by the Weibayes fit

  DataMode mode = DataMode::synth;
  dataset::SynthesisSpec synth;
  std::array<std::size_t, 3> split_counts = {6, 3, 3};  // synth mode: train/val/test runs
  std::vector<RunSource> runs;                          // real mode

  TrainSection train;
  SearchSection search;
  search::FilterThresholds filter;
};

// Parse and validate. Errors name the offending JSON field.
Manifest load_manifest(const std::filesystem::path& path);

// FNV-1a of the canonical (sorted-key) JSON form of the effective
// configuration. out_dir is excluded: moving artifacts must not change
// their identity.
std::uint64_t manifest_hash(const Manifest& manifest);

}  // namespace rulkit::cli
