#include "rulkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rulkit/random.hpp"

namespace rulkit::dataset {

void validate_spec(const SynthesisSpec& spec) {
  if (spec.run_count == 0) throw std::invalid_argument("synthesize_runs: run_count must be positive");
  if (spec.windows_per_run == 0)
    throw std::invalid_argument("synthesize_runs: windows_per_run must be positive");
  if (spec.window_length < 2)
    throw std::invalid_argument("synthesize_runs: window_length must be at least 2");
  if (!(spec.sample_rate > 0.0))
    throw std::invalid_argument("synthesize_runs: sample_rate must be positive");
  if (!(spec.weibull_beta > 0.0) || !(spec.weibull_eta > 0.0))
    throw std::invalid_argument("synthesize_runs: weibull_beta and weibull_eta must be positive");
  if (!(spec.horizon > 0.0)) throw std::invalid_argument("synthesize_runs: horizon must be positive");
  if (!(spec.onset_fraction > 0.0) || !(spec.onset_fraction < 1.0))
    throw std::invalid_argument("synthesize_runs: onset_fraction must lie in (0, 1)");
  if (spec.noise_level < 0.0)
    throw std::invalid_argument("synthesize_runs: noise_level must be >= 0");
  const double nyquist = spec.sample_rate / 2.0;
  for (const double f : {spec.base_freq, spec.drift_freq, spec.fault_freq})
    if (!(f > 0.0) || f >= nyquist)
      throw std::invalid_argument("synthesize_runs: tone frequencies must lie in (0, nyquist)");
}

std::vector<Run> synthesize_runs(const SynthesisSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<Run> runs;
  runs.reserve(spec.run_count);

  for (std::size_t i = 0; i < spec.run_count; ++i) {
    Rng rng(mix_seed(seed, i));

    // Failure time by inverse CDF: eta * (-ln(1-u))^(1/beta).
    double u = uniform_unit(rng);
    while (u == 0.0) u = uniform_unit(rng);
    const double t_fail =
        spec.weibull_eta * std::pow(-std::log1p(-u), 1.0 / spec.weibull_beta);
    const bool failed = t_fail <= spec.horizon;
    const double total = failed ? t_fail : spec.horizon;
    const double onset = spec.onset_fraction * t_fail;

    const double phase_base = uniform_range(rng, 0.0, two_pi);
    const double phase_drift = uniform_range(rng, 0.0, two_pi);
    const double phase_fault = uniform_range(rng, 0.0, two_pi);

    Run run;
    run.id = "synth-" + std::string(3 - std::min<std::size_t>(3, std::to_string(i).size()), '0') +
             std::to_string(i);
    run.failed = failed;
    run.total_runtime = total;
    run.windows.reserve(spec.windows_per_run);
    run.times.reserve(spec.windows_per_run);

    for (std::size_t w = 1; w <= spec.windows_per_run; ++w) {
      // ratio first so the last window lands on total exactly
      const double t =
          total * (static_cast<double>(w) / static_cast<double>(spec.windows_per_run));
      const double life = t / t_fail;  // true wear state, even when censored
      const double drift_amp = spec.drift_gain * life;
      double fault_amp = 0.0;
      if (t > onset) {
        const double progress = (t - onset) / (t_fail - onset);
        fault_amp = spec.fault_gain * progress * progress;
      }

      signal::RawWindow window;
      window.sample_rate = spec.sample_rate;
      window.samples.resize(spec.window_length);
      for (std::size_t k = 0; k < spec.window_length; ++k) {
        const double ts = static_cast<double>(k) / spec.sample_rate;
        double s = spec.base_amplitude * std::sin(two_pi * spec.base_freq * ts + phase_base);
        s += drift_amp * std::sin(two_pi * spec.drift_freq * ts + phase_drift);
        if (fault_amp > 0.0) s += fault_amp * std::sin(two_pi * spec.fault_freq * ts + phase_fault);
        if (spec.noise_level > 0.0) s += spec.noise_level * normal_unit(rng);
        window.samples[k] = s;
      }
      run.windows.push_back(std::move(window));
      run.times.push_back(t);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace rulkit::dataset
