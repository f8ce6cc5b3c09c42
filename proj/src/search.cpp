#include "rulkit/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

#include "rulkit/textio.hpp"

namespace rulkit::search {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool metrics_finite(const trainer::Metrics& m) {
  return std::isfinite(m.mse) && std::isfinite(m.rmse) && std::isfinite(m.rmsle) &&
         m.r2_defined && std::isfinite(m.r2);
}

trainer::Metrics nan_metrics() {
  trainer::Metrics m;
  m.mse = m.rmse = m.rmsle = m.r2 = kNaN;
  m.r2_defined = false;
  return m;
}

}  // namespace

void validate_space(const SearchSpace& space) {
  if (space.batch_sizes.empty() || space.learning_rates.empty() || space.units.empty() ||
      space.dropout.empty())
    throw std::invalid_argument("search space: every option set must be non-empty");
  if (!(space.lambda_min >= 0.0) || !(space.lambda_max <= 3.0) ||
      !(space.lambda_min <= space.lambda_max))
    throw std::invalid_argument("search space: lambda range must lie inside [0, 3]");
  if (space.min_hidden_layers == 0 || space.min_hidden_layers > space.max_hidden_layers)
    throw std::invalid_argument("search space: bad hidden-layer range");
  for (const double d : space.dropout)
    if (!(d >= 0.0) || d >= 1.0)
      throw std::invalid_argument("search space: dropout values must lie in [0, 1)");
}

ArchitectureDraw sample_architecture(const SearchSpace& space, Rng& rng) {
  // Draw order is part of the contract; reordering would silently change
  // every seeded experiment.
  ArchitectureDraw draw;
  draw.batch_size = space.batch_sizes[uniform_index(rng, space.batch_sizes.size())];
  draw.learning_rate = space.learning_rates[uniform_index(rng, space.learning_rates.size())];
  draw.lambda = uniform_range(rng, space.lambda_min, space.lambda_max);
  draw.hidden_layers =
      space.min_hidden_layers + uniform_index(rng, space.max_hidden_layers - space.min_hidden_layers + 1);
  draw.units = space.units[uniform_index(rng, space.units.size())];
  draw.dropout = space.dropout[uniform_index(rng, space.dropout.size())];
  draw.seed = rng();
  return draw;
}

std::vector<TrialConfig> plan_trials(const SearchSpace& space, std::size_t n_architectures,
                                     std::uint64_t master_seed) {
  validate_space(space);
  std::vector<TrialConfig> trials;
  trials.reserve(n_architectures * losses::all_loss_kinds.size());
  Rng rng(master_seed);
  for (std::size_t a = 0; a < n_architectures; ++a) {
    const ArchitectureDraw draw = sample_architecture(space, rng);
    for (std::size_t k = 0; k < losses::all_loss_kinds.size(); ++k) {
      TrialConfig cfg;
      cfg.trial_index = a * losses::all_loss_kinds.size() + k;
      cfg.arch_index = a;
      cfg.loss_index = k;
      cfg.arch = draw;
      cfg.loss = losses::all_loss_kinds[k];
      cfg.seed = draw.seed;
      if (space.lambda_per_trial) {
        Rng lambda_rng(mix_seed(draw.seed, k));
        cfg.lambda = uniform_range(lambda_rng, space.lambda_min, space.lambda_max);
      } else {
        cfg.lambda = draw.lambda;
      }
      trials.push_back(cfg);
    }
  }
  return trials;
}

namespace {

TrialResult run_trial(const TrialConfig& cfg, const SearchData& data,
                      const SearchOptions& options) {
  TrialResult result;
  result.config = cfg;
  result.train = nan_metrics();
  result.validation = nan_metrics();
  result.test = nan_metrics();

  network::NetworkArchitecture arch;
  arch.input_dim = data.train->features.cols();
  arch.hidden_layers = cfg.arch.hidden_layers;
  arch.units_per_layer = cfg.arch.units;
  arch.dropout_prob = cfg.arch.dropout;

  trainer::TrainConfig tc;
  tc.batch_size = cfg.arch.batch_size;
  tc.learning_rate = cfg.arch.learning_rate;
  tc.max_epochs = options.max_epochs;
  tc.patience = options.patience;
  tc.seed = cfg.seed;
  tc.loss.kind = cfg.loss;
  tc.loss.lambda = cfg.lambda;
  tc.loss.weibull_params = data.weibull_params;
  if (options.inject_nonfinite)
    tc.inject_nonfinite_after_step = options.inject_nonfinite(cfg.arch_index, cfg.loss_index);

  trainer::FitResult fit =
      trainer::fit(network::init_network(arch, cfg.seed), *data.train, *data.validation, tc);
  result.stop_epoch = fit.stop_epoch;
  if (fit.diverged) {
    result.status = TrialStatus::diverged;
    return result;
  }
  result.train = trainer::evaluate(fit.state, *data.train);
  result.validation = trainer::evaluate(fit.state, *data.validation);
  result.test = trainer::evaluate(fit.state, *data.test);
  result.status = metrics_finite(result.train) && metrics_finite(result.validation) &&
                          metrics_finite(result.test)
                      ? TrialStatus::ok
                      : TrialStatus::diverged;
  return result;
}

}  // namespace

SearchOutcome run_search(const SearchSpace& space, const SearchData& data,
                         std::size_t n_architectures, std::uint64_t master_seed,
                         const SearchOptions& options) {
  if (data.train == nullptr || data.validation == nullptr || data.test == nullptr)
    throw std::invalid_argument("run_search: all three splits are required");
  if (options.workers == 0) throw std::invalid_argument("run_search: workers must be positive");

  const std::vector<TrialConfig> trials = plan_trials(space, n_architectures, master_seed);
  std::vector<TrialResult> slots(trials.size());
  std::vector<char> completed(trials.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};

  auto worker = [&] {
    while (true) {
      if (options.stop_requested && options.stop_requested()) {
        interrupted.store(true);
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= trials.size()) return;
      slots[i] = run_trial(trials[i], data, options);
      completed[i] = 1;
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, trials.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  SearchOutcome outcome;
  outcome.interrupted = interrupted.load();
  outcome.results.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (completed[i]) outcome.results.push_back(std::move(slots[i]));
  return outcome;
}

std::vector<TrialResult> filter_results(std::span<const TrialResult> results,
                                        const FilterThresholds& thresholds) {
  std::vector<TrialResult> kept;
  for (const TrialResult& r : results) {
    if (r.status != TrialStatus::ok) continue;
    bool pass = true;
    for (const trainer::Metrics* m : {&r.train, &r.validation, &r.test}) {
      if (!(m->r2_defined && m->r2 > thresholds.r2_min && m->rmse < thresholds.rmse_max)) {
        pass = false;
        break;
      }
    }
    if (pass) kept.push_back(r);
  }
  return kept;
}

std::vector<LossFrequency> rank_loss_frequency(std::span<const TrialResult> surviving) {
  std::map<std::size_t, const TrialResult*> winners;
  for (const TrialResult& r : surviving) {
    auto [it, inserted] = winners.try_emplace(r.config.arch_index, &r);
    if (inserted) continue;
    const TrialResult* best = it->second;
    const bool better = r.test.r2 > best->test.r2 ||
                        (r.test.r2 == best->test.r2 &&
                         (r.test.rmse < best->test.rmse ||
                          (r.test.rmse == best->test.rmse &&
                           r.config.loss_index < best->config.loss_index)));
    if (better) it->second = &r;
  }

  std::array<std::size_t, losses::all_loss_kinds.size()> wins{};
  for (const auto& [arch, best] : winners) wins[best->config.loss_index] += 1;

  std::vector<LossFrequency> table;
  for (std::size_t k = 0; k < losses::all_loss_kinds.size(); ++k) {
    LossFrequency row;
    row.kind = losses::all_loss_kinds[k];
    row.wins = wins[k];
    row.percent = winners.empty() ? 0.0
                                  : 100.0 * static_cast<double>(wins[k]) /
                                        static_cast<double>(winners.size());
    table.push_back(row);
  }
  std::stable_sort(table.begin(), table.end(),
                   [](const LossFrequency& a, const LossFrequency& b) { return a.wins > b.wins; });
  return table;
}

namespace {

// Continued-fraction evaluation of the regularized incomplete beta
// function (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double md = static_cast<double>(m);
    const double m2 = 2.0 * md;
    double aa = md * (b - md) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + md) * (qab + md) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// r for dichotomy `flags` against `values`; population-std normalization.
std::optional<double> r_pb_raw(std::span<const double> values, std::span<const char> flags) {
  const std::size_t n = values.size();
  std::size_t n1 = 0;
  double sum1 = 0.0;
  double sum_all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_all += values[i];
    if (flags[i]) {
      ++n1;
      sum1 += values[i];
    }
  }
  const std::size_t n0 = n - n1;
  if (n1 < 2 || n0 < 2) return std::nullopt;
  const double mean_all = sum_all / static_cast<double>(n);
  double var = 0.0;
  for (const double v : values) var += (v - mean_all) * (v - mean_all);
  var /= static_cast<double>(n);
  if (var == 0.0) return std::nullopt;
  const double m1 = sum1 / static_cast<double>(n1);
  const double m0 = (sum_all - sum1) / static_cast<double>(n0);
  const double frac = static_cast<double>(n1) * static_cast<double>(n0) /
                      (static_cast<double>(n) * static_cast<double>(n));
  return (m1 - m0) / std::sqrt(var) * std::sqrt(frac);
}

void collect_for_correlation(std::span<const TrialResult> results, losses::LossKind kind,
                             std::vector<double>& values, std::vector<char>& flags) {
  for (const TrialResult& r : results) {
    if (r.status != TrialStatus::ok || !r.test.r2_defined) continue;
    values.push_back(r.test.r2);
    flags.push_back(r.config.loss == kind ? 1 : 0);
  }
}

}  // namespace

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

PointBiserial point_biserial(std::span<const TrialResult> results, losses::LossKind kind) {
  std::vector<double> values;
  std::vector<char> flags;
  collect_for_correlation(results, kind, values, flags);

  PointBiserial out;
  out.n_in = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), char{1}));
  out.n_out = values.size() - out.n_in;
  const auto r = r_pb_raw(values, flags);
  if (!r) return out;
  out.defined = true;
  out.r = *r;
  const double df = static_cast<double>(values.size()) - 2.0;
  const double denom = 1.0 - *r * *r;
  if (denom <= 0.0) {
    out.p_value = 0.0;
  } else {
    out.p_value = student_t_two_sided_p(*r * std::sqrt(df / denom), df);
  }
  return out;
}

double point_biserial_permutation_p(std::span<const TrialResult> results, losses::LossKind kind,
                                    std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations == 0)
    throw std::invalid_argument("point_biserial_permutation_p: need at least one permutation");
  std::vector<double> values;
  std::vector<char> flags;
  collect_for_correlation(results, kind, values, flags);
  const auto observed = r_pb_raw(values, flags);
  if (!observed)
    throw std::invalid_argument("point_biserial_permutation_p: correlation undefined for inputs");

  Rng rng(seed);
  std::size_t at_least = 0;
  std::vector<char> shuffled = flags;
  for (std::size_t p = 0; p < n_permutations; ++p) {
    shuffle_portable(shuffled, rng);
    const auto r = r_pb_raw(values, shuffled);
    if (r && std::fabs(*r) >= std::fabs(*observed)) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(n_permutations + 1);
}

double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile_linear: empty input");
  if (!(q >= 0.0) || !(q <= 1.0)) throw std::invalid_argument("quantile_linear: q must lie in [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double w = h - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

EpochSummary early_stop_summary(std::span<const TrialResult> results, LossGroup group) {
  std::vector<double> epochs;
  for (const TrialResult& r : results) {
    const bool weibull = losses::uses_weibull(r.config.loss);
    if ((group == LossGroup::weibull) == weibull)
      epochs.push_back(static_cast<double>(r.stop_epoch));
  }
  EpochSummary s;
  s.count = epochs.size();
  if (epochs.empty()) {
    s.mean = s.stddev = s.min = s.q25 = s.q50 = s.q75 = s.max = kNaN;
    return s;
  }
  s.defined = true;
  std::sort(epochs.begin(), epochs.end());
  const double n = static_cast<double>(epochs.size());
  s.mean = std::accumulate(epochs.begin(), epochs.end(), 0.0) / n;
  if (epochs.size() < 2) {
    s.stddev = kNaN;
  } else {
    double ss = 0.0;
    for (const double e : epochs) ss += (e - s.mean) * (e - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  s.min = epochs.front();
  s.max = epochs.back();
  s.q25 = quantile_linear(epochs, 0.25);
  s.q50 = quantile_linear(epochs, 0.50);
  s.q75 = quantile_linear(epochs, 0.75);
  return s;
}

namespace {

constexpr std::string_view kResultsMagic = "# rulkit-results v1";

std::string result_row(const TrialResult& r) {
  std::string out;
  const auto add = [&out](std::string_view field) {
    if (!out.empty()) out += '\t';
    out += field;
  };
  add(std::to_string(r.config.trial_index));
  add(std::to_string(r.config.arch_index));
  add(std::to_string(r.config.loss_index));
  add(losses::loss_kind_name(r.config.loss));
  add(format_double(r.config.lambda));
  add(std::to_string(r.config.arch.hidden_layers));
  add(std::to_string(r.config.arch.units));
  add(format_double(r.config.arch.dropout));
  add(std::to_string(r.config.arch.batch_size));
  add(format_double(r.config.arch.learning_rate));
  add(std::to_string(r.config.seed));
  add(std::to_string(r.stop_epoch));
  add(r.status == TrialStatus::ok ? "ok" : "diverged");
  for (const trainer::Metrics* m : {&r.train, &r.validation, &r.test}) {
    add(format_double(m->mse));
    add(format_double(m->rmse));
    add(format_double(m->rmsle));
    add(format_double(m->r2));
  }
  return out;
}

TrialResult parse_result_row(std::string_view line) {
  const auto fields = split_fields(line, '\t');
  if (fields.size() != 25)
    throw std::runtime_error("results table: expected 25 columns, got " +
                             std::to_string(fields.size()));
  TrialResult r;
  r.config.trial_index = static_cast<std::size_t>(parse_u64(fields[0]));
  r.config.arch_index = static_cast<std::size_t>(parse_u64(fields[1]));
  r.config.loss_index = static_cast<std::size_t>(parse_u64(fields[2]));
  const auto kind = losses::loss_kind_from_name(fields[3]);
  if (!kind) throw std::runtime_error("results table: unknown loss kind '" + std::string(fields[3]) + "'");
  r.config.loss = *kind;
  r.config.lambda = parse_double(fields[4]);
  r.config.arch.hidden_layers = static_cast<std::size_t>(parse_u64(fields[5]));
  r.config.arch.units = static_cast<std::size_t>(parse_u64(fields[6]));
  r.config.arch.dropout = parse_double(fields[7]);
  r.config.arch.batch_size = static_cast<std::size_t>(parse_u64(fields[8]));
  r.config.arch.learning_rate = parse_double(fields[9]);
  r.config.arch.lambda = r.config.lambda;
  r.config.seed = parse_u64(fields[10]);
  r.config.arch.seed = r.config.seed;
  r.stop_epoch = static_cast<std::size_t>(parse_u64(fields[11]));
  if (fields[12] == "ok") r.status = TrialStatus::ok;
  else if (fields[12] == "diverged") r.status = TrialStatus::diverged;
  else throw std::runtime_error("results table: unknown status '" + std::string(fields[12]) + "'");
  trainer::Metrics* metrics[] = {&r.train, &r.validation, &r.test};
  for (std::size_t s = 0; s < 3; ++s) {
    metrics[s]->mse = parse_double(fields[13 + s * 4]);
    metrics[s]->rmse = parse_double(fields[14 + s * 4]);
    metrics[s]->rmsle = parse_double(fields[15 + s * 4]);
    metrics[s]->r2 = parse_double(fields[16 + s * 4]);
    metrics[s]->r2_defined = std::isfinite(metrics[s]->r2);
  }
  return r;
}

}  // namespace

void save_results(const std::filesystem::path& path, std::span<const TrialResult> results,
                  std::uint64_t manifest_hash, std::string_view table_kind) {
  std::string body;
  for (const TrialResult& r : results) {
    body += result_row(r);
    body += '\n';
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_results: cannot write " + path.string());
  out << kResultsMagic << '\n';
  out << "# table " << table_kind << '\n';
  out << "# manifest_hash " << hash_hex(manifest_hash) << '\n';
  out << "# content_hash " << hash_hex(fnv1a64(body)) << '\n';
  out << "# columns trial\tarch\tloss_index\tloss\tlambda\thidden_layers\tunits\tdropout\t"
         "batch_size\tlearning_rate\tseed\tstop_epoch\tstatus\t"
         "train_mse\ttrain_rmse\ttrain_rmsle\ttrain_r2\t"
         "val_mse\tval_rmse\tval_rmsle\tval_r2\t"
         "test_mse\ttest_rmse\ttest_rmsle\ttest_r2\n";
  out << body;
  if (!out) throw std::runtime_error("save_results: write failed for " + path.string());
}

LoadedResults load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_results: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsMagic)
    throw std::runtime_error("load_results: " + path.string() + " is not a results table");

  LoadedResults loaded;
  std::string expected_hash;
  std::string body;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto rest = std::string_view(line).substr(2);
      const auto space_pos = rest.find(' ');
      const auto key = rest.substr(0, space_pos);
      const auto value =
          space_pos == std::string_view::npos ? std::string_view{} : rest.substr(space_pos + 1);
      if (key == "manifest_hash") loaded.manifest_hash = parse_u64_hex(value);
      else if (key == "table") loaded.table_kind = std::string(value);
      else if (key == "content_hash") expected_hash = std::string(value);
      continue;
    }
    body += line;
    body += '\n';
    try {
      loaded.results.push_back(parse_result_row(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("load_results: " + path.string() + ": " + e.what());
    }
  }
  if (expected_hash.empty())
    throw std::runtime_error("load_results: " + path.string() + " has no content hash");
  if (hash_hex(fnv1a64(body)) != expected_hash)
    throw std::runtime_error("load_results: content hash mismatch in " + path.string() +
                             "; the table is corrupt or was edited");
  return loaded;
}

}  // namespace rulkit::search
