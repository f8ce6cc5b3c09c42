#pragma once

#include <cstdint>

#include "rulkit/dataset.hpp"

namespace rulkit::dataset {

// Synthetic run-to-failure generator. Each run draws a failure time from
// Weibull(beta, eta); observation stops at the horizon, and runs whose
// failure lies beyond it come back censored. The vibration signal carries a
// steady tone, a tone whose amplitude grows with true life fraction, and a
// fault tone that switches on at onset_fraction of the failure time, plus
// white noise.
struct SynthesisSpec {
  std::size_t run_count = 12;
  std::size_t windows_per_run = 30;
  std::size_t window_length = 1024;
  double sample_rate = 20480.0;

  double weibull_beta = 2.0;   // failure-time law
  double weibull_eta = 100.0;
  double horizon = 134.0;      // observation cutoff
  double onset_fraction = 0.5; // degradation starts at this fraction of life

  double noise_level = 0.05;
  double base_amplitude = 1.0;
  double drift_gain = 1.0;
  double fault_gain = 2.0;
  double base_freq = 1000.0;   // Hz
  double drift_freq = 4200.0;
  double fault_freq = 7400.0;
};

void validate_spec(const SynthesisSpec& spec);

// Deterministic for a given (spec, seed); run i depends only on (seed, i).
std::vector<Run> synthesize_runs(const SynthesisSpec& spec, std::uint64_t seed);

}  // namespace rulkit::dataset
