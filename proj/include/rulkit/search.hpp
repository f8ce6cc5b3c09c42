#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rulkit/dataset.hpp"
#include "rulkit/losses.hpp"
#include "rulkit/random.hpp"
#include "rulkit/trainer.hpp"

namespace rulkit::search {

// Random-search grid. Defaults are the studied space; every draw is
// uniform over its set or range.
struct SearchSpace {
  std::vector<std::size_t> batch_sizes = {32, 64, 128, 256, 512};
  std::vector<double> learning_rates = {0.1, 0.01, 0.001, 0.0001};
  double lambda_min = 0.0;
  double lambda_max = 3.0;
  std::size_t min_hidden_layers = 2;
  std::size_t max_hidden_layers = 7;
  std::vector<std::size_t> units = {16, 32, 64, 128, 256};
  std::vector<double> dropout = {0.1, 0.2, 0.25, 0.4, 0.5, 0.6};
  // When set, each of an architecture's nine trials redraws its own lambda
  // instead of sharing the architecture's draw.
  bool lambda_per_trial = false;
};

void validate_space(const SearchSpace& space);

// One sampled hyperparameter point. The nine loss kinds trained on it share
// this draw, including the seed, so the loss function is the only thing
// that differs between siblings.
struct ArchitectureDraw {
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  double lambda = 0.0;
  std::size_t hidden_layers = 0;
  std::size_t units = 0;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

ArchitectureDraw sample_architecture(const SearchSpace& space, Rng& rng);

struct TrialConfig {
  std::size_t trial_index = 0;  // arch_index * 9 + loss_index
  std::size_t arch_index = 0;
  std::size_t loss_index = 0;   // position in losses::all_loss_kinds
  ArchitectureDraw arch;
  losses::LossKind loss = losses::LossKind::mse;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

// The full deterministic trial list: n_architectures draws from a stream
// seeded by master_seed, each expanded across all nine loss kinds.
std::vector<TrialConfig> plan_trials(const SearchSpace& space, std::size_t n_architectures,
                                     std::uint64_t master_seed);

enum class TrialStatus { ok, diverged };

struct TrialResult {
  TrialConfig config;
  trainer::Metrics train, validation, test;
  std::size_t stop_epoch = 0;
  TrialStatus status = TrialStatus::ok;
};

// The splits plus the Weibull law the six knowledge-informed losses use.
struct SearchData {
  const dataset::FeatureSet* train = nullptr;
  const dataset::FeatureSet* validation = nullptr;
  const dataset::FeatureSet* test = nullptr;
  weibull::WeibullParams weibull_params{1.0, 1.0};
};

struct SearchOptions {
  std::size_t workers = 1;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  // Test seam: return the optimizer step after which the trial's batch loss
  // turns NaN (0 = leave the trial alone). Called with (arch, loss) indices.
  std::function<std::size_t(std::size_t, std::size_t)> inject_nonfinite;
  // Cooperative interruption, polled between trials.
  std::function<bool()> stop_requested;
};

struct SearchOutcome {
  std::vector<TrialResult> results;  // ordered by trial_index; on
                                     // interruption, completed trials only
  bool interrupted = false;
};

// Trains every planned trial over a bounded worker pool. Results are
// identical for any worker count: the plan is fixed up front, each trial's
// randomness derives only from its own seed, and results land in
// preallocated slots.
SearchOutcome run_search(const SearchSpace& space, const SearchData& data,
                         std::size_t n_architectures, std::uint64_t master_seed,
                         const SearchOptions& options = {});

struct FilterThresholds {
  double r2_min = 0.2;    // strict > on every split
  double rmse_max = 0.35; // strict < on every split
};

// Keeps trials that beat both thresholds on train, validation, and test.
// Diverged trials never pass.
std::vector<TrialResult> filter_results(std::span<const TrialResult> results,
                                        const FilterThresholds& thresholds);

struct LossFrequency {
  losses::LossKind kind = losses::LossKind::mse;
  std::size_t wins = 0;
  double percent = 0.0;
};

// Per-architecture winners by test R^2 (ties: lower test RMSE, then loss
// declaration order), tallied per loss kind. Sorted by wins, descending.
std::vector<LossFrequency> rank_loss_frequency(std::span<const TrialResult> surviving);

struct PointBiserial {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n_in = 0;   // results with the probed loss kind
  std::size_t n_out = 0;
  bool defined = false;   // needs >= 2 in each group and test-R^2 variance
};

// Correlation between membership in `kind` and test R^2 across the results,
// with population-std normalization; p-value from the two-sided Student t
// transform with n-2 degrees of freedom.
PointBiserial point_biserial(std::span<const TrialResult> results, losses::LossKind kind);

// Permutation cross-check of the same statistic: the fraction of label
// shuffles with |r| at least as large as observed (add-one smoothed).
double point_biserial_permutation_p(std::span<const TrialResult> results, losses::LossKind kind,
                                    std::size_t n_permutations, std::uint64_t seed);

enum class LossGroup { traditional, weibull };

struct EpochSummary {
  std::size_t count = 0;
  double mean = 0.0, stddev = 0.0;
  double min = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, max = 0.0;
  bool defined = false;  // false when the group is empty
};

// Distribution of early-stopping epochs for the traditional kinds
// (MSE/RMSE/RMSLE) or the six Weibull-informed kinds. Quantiles use linear
// interpolation; stddev is the sample deviation (NaN for a single result).
EpochSummary early_stop_summary(std::span<const TrialResult> results, LossGroup group);

// Linear-interpolation quantile of ascending `sorted` at q in [0, 1].
double quantile_linear(std::span<const double> sorted, double q);

// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Row-per-trial table with '#' header lines carrying the manifest hash.
void save_results(const std::filesystem::path& path, std::span<const TrialResult> results,
                  std::uint64_t manifest_hash, std::string_view table_kind);
struct LoadedResults {
  std::vector<TrialResult> results;
  std::uint64_t manifest_hash = 0;
  std::string table_kind;
};
LoadedResults load_results(const std::filesystem::path& path);

}  // namespace rulkit::search
