#include "rulkit/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "rulkit/feature_cache.hpp"
#include "rulkit/textio.hpp"

namespace rulkit::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

void write_provenance(const Manifest& m, const GlobalOptions& options, const char* command) {
  const fs::path dir = fs::path(m.out_dir) / "provenance";
  fs::create_directories(dir);
  json j;
  j["command"] = command;
  j["manifest_path"] = options.manifest_path;
  j["manifest_hash"] = hash_hex(manifest_hash(m));
  j["seed"] = m.seed;
  j["workers"] = options.workers;
  json overrides = json::object();
  if (options.seed_override) overrides["seed"] = *options.seed_override;
  if (options.out_override) overrides["out"] = *options.out_override;
  j["overrides"] = std::move(overrides);
  std::ofstream out(dir / (std::string(command) + ".json"));
  if (!out) throw std::runtime_error("cannot write provenance for " + std::string(command));
  out << j.dump(2) << '\n';
}

fs::path runs_dir(const Manifest& m) { return fs::path(m.out_dir) / "runs"; }
fs::path features_path(const Manifest& m) { return fs::path(m.out_dir) / "features.tsv"; }
fs::path results_path(const Manifest& m) { return fs::path(m.out_dir) / "results.tsv"; }
fs::path filtered_path(const Manifest& m) { return fs::path(m.out_dir) / "filtered.tsv"; }

void require_hash(std::uint64_t artifact_hash, std::uint64_t current, const std::string& what) {
  if (artifact_hash != current)
    throw std::runtime_error(what + " was built under manifest " + hash_hex(artifact_hash) +
                             " but the current configuration hashes to " + hash_hex(current) +
                             "; regenerate the pipeline from the data step");
}

std::vector<dataset::Run> load_all_runs(const Manifest& m, std::uint64_t current_hash) {
  const fs::path dir = runs_dir(m);
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".run") files.push_back(entry.path());
  if (files.empty())
    throw std::runtime_error("no runs found under " + dir.string() +
                             "; run `rulkit synth` or `rulkit ingest` first");
  std::sort(files.begin(), files.end());
  std::vector<dataset::Run> runs;
  runs.reserve(files.size());
  for (const fs::path& file : files) {
    dataset::LoadedRun loaded = dataset::load_run(file);
    require_hash(loaded.manifest_hash, current_hash, file.string());
    runs.push_back(std::move(loaded.run));
  }
  return runs;
}

// Synth runs are split by position: the first split_counts[0] run ids train,
// the next validate, the rest test. Real runs carry their split in the
// manifest.
std::map<std::string, dataset::Split> split_assignment(const Manifest& m,
                                                       std::span<const dataset::Run> runs) {
  std::map<std::string, dataset::Split> splits;
  if (m.mode == DataMode::real) {
    for (const RunSource& src : m.runs) splits[src.id] = src.split;
    return splits;
  }
  if (runs.size() != m.synth.run_count)
    throw std::runtime_error("expected " + std::to_string(m.synth.run_count) +
                             " synthesized runs, found " + std::to_string(runs.size()) +
                             "; re-run `rulkit synth`");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const dataset::Split split = i < m.split_counts[0] ? dataset::Split::train
                                 : i < m.split_counts[0] + m.split_counts[1]
                                     ? dataset::Split::validation
                                     : dataset::Split::test;
    splits[runs[i].id] = split;
  }
  return splits;
}

std::vector<weibull::FailureRecord> training_records(std::span<const dataset::Run> runs,
                                                     const std::map<std::string, dataset::Split>& splits) {
  std::vector<weibull::FailureRecord> records;
  for (const dataset::Run& run : runs) {
    const auto it = splits.find(run.id);
    if (it == splits.end())
      throw std::runtime_error("run " + run.id + " has no split assignment in the manifest");
    if (it->second == dataset::Split::train) records.push_back({run.total_runtime, run.failed});
  }
  return records;
}

dataset::CachedFeatures load_features_checked(const Manifest& m, std::uint64_t current_hash) {
  const fs::path path = features_path(m);
  if (!fs::exists(path))
    throw std::runtime_error(path.string() + " not found; run `rulkit features` first");
  dataset::CachedFeatures cache = dataset::load_features(path);
  require_hash(cache.manifest_hash, current_hash, path.string());
  return cache;
}

search::LoadedResults load_results_checked(const fs::path& path, std::uint64_t current_hash,
                                           const char* producer) {
  if (!fs::exists(path))
    throw std::runtime_error(path.string() + " not found; run `rulkit " + producer + "` first");
  search::LoadedResults loaded = search::load_results(path);
  require_hash(loaded.manifest_hash, current_hash, path.string());
  return loaded;
}

trainer::TrainConfig train_config_from(const TrainSection& section, double beta, double eta) {
  trainer::TrainConfig tc;
  tc.batch_size = section.batch_size;
  tc.learning_rate = section.learning_rate;
  tc.max_epochs = section.max_epochs;
  tc.patience = section.patience;
  tc.seed = section.seed;
  tc.loss.kind = *losses::loss_kind_from_name(section.loss);
  tc.loss.lambda = section.lambda;
  tc.loss.weibull_params = weibull::WeibullParams(beta, eta);
  return tc;
}

void save_curves(const fs::path& path, const trainer::FitResult& fit, std::uint64_t hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# rulkit-curves v1\n";
  out << "# manifest_hash " << hash_hex(hash) << '\n';
  out << "# columns epoch\ttrain_loss\tvalidation_loss\n";
  for (std::size_t e = 0; e < fit.train_curve.size(); ++e)
    out << e + 1 << '\t' << format_double(fit.train_curve[e]) << '\t'
        << format_double(fit.validation_curve[e]) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void print_metrics_line(std::ostream& os, const char* name, const trainer::Metrics& m) {
  os << "  " << name << ": rmse " << format_double(m.rmse) << ", rmsle " << format_double(m.rmsle)
     << ", r2 " << (m.r2_defined ? format_double(m.r2) : "undefined") << '\n';
}

const search::TrialResult* best_by_test_r2(std::span<const search::TrialResult> results) {
  const search::TrialResult* best = nullptr;
  for (const search::TrialResult& r : results) {
    if (r.status != search::TrialStatus::ok || !r.test.r2_defined) continue;
    if (best == nullptr || r.test.r2 > best->test.r2 ||
        (r.test.r2 == best->test.r2 &&
         (r.test.rmse < best->test.rmse ||
          (r.test.rmse == best->test.rmse && r.config.trial_index < best->config.trial_index))))
      best = &r;
  }
  return best;
}

}  // namespace

Manifest effective_manifest(const GlobalOptions& options) {
  Manifest m = load_manifest(options.manifest_path);
  if (options.seed_override) m.seed = *options.seed_override;
  if (options.out_override) m.out_dir = *options.out_override;
  // the single-model seed follows the master seed unless pinned explicitly
  if (options.seed_override && m.train.seed != *options.seed_override) m.train.seed = m.seed;
  return m;
}

int cmd_synth(const Manifest& m, const GlobalOptions& options) {
  if (m.mode != DataMode::synth)
    throw std::runtime_error("manifest data.mode is 'real'; use `rulkit ingest` instead");
  const std::uint64_t hash = manifest_hash(m);
  const std::vector<dataset::Run> runs = dataset::synthesize_runs(m.synth, m.seed);
  fs::create_directories(runs_dir(m));
  std::size_t failed = 0;
  for (const dataset::Run& run : runs) {
    dataset::save_run(runs_dir(m) / (run.id + ".run"), run, hash);
    failed += run.failed ? 1 : 0;
  }
  write_provenance(m, options, "synth");
  std::cout << "synthesized " << runs.size() << " runs (" << failed << " failed, "
            << runs.size() - failed << " censored) -> " << runs_dir(m).string() << '\n';
  return 0;
}

int cmd_ingest(const Manifest& m, const GlobalOptions& options) {
  if (m.mode != DataMode::real)
    throw std::runtime_error("manifest data.mode is 'synth'; use `rulkit synth` instead");
  const std::uint64_t hash = manifest_hash(m);
  fs::create_directories(runs_dir(m));
  for (const RunSource& src : m.runs) {
    dataset::IngestConfig config;
    config.format = src.format;
    config.channel = src.channel;
    config.sample_rate = src.sample_rate;
    const dataset::Run run = dataset::ingest_run(src.path, config, src.id, src.failed);
    dataset::save_run(runs_dir(m) / (run.id + ".run"), run, hash);
    std::cout << "ingested " << run.id << ": " << run.windows.size() << " windows, "
              << format_double(run.total_runtime) << " s total\n";
  }
  write_provenance(m, options, "ingest");
  return 0;
}

int cmd_features(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const std::vector<dataset::Run> runs = load_all_runs(m, hash);
  const auto splits = split_assignment(m, runs);
  const dataset::AssembledData assembled =
      dataset::assemble(runs, splits, m.bin_count, m.kaiser_shape);
  for (const std::size_t c : assembled.scaler.degenerate_columns)
    std::cerr << "warning: feature column " << c << " is constant on the training split; scaled to 0\n";

  dataset::CachedFeatures cache;
  cache.train = assembled.train;
  cache.validation = assembled.validation;
  cache.test = assembled.test;
  cache.scaler = assembled.scaler;
  cache.bin_count = assembled.bin_count;
  cache.beta = m.beta;
  cache.eta = weibull::weibayes_eta(assembled.failure_records, m.beta);
  cache.manifest_hash = hash;
  save_features(features_path(m), cache);
  write_provenance(m, options, "features");
  std::cout << "features: train " << cache.train.features.rows() << " rows, validation "
            << cache.validation.features.rows() << ", test " << cache.test.features.rows()
            << "; eta " << format_double(cache.eta) << " (beta " << format_double(cache.beta)
            << ") -> " << features_path(m).string() << '\n';
  return 0;
}

int cmd_weibayes(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const std::vector<dataset::Run> runs = load_all_runs(m, hash);
  const auto splits = split_assignment(m, runs);
  const auto records = training_records(runs, splits);
  const double eta = weibull::weibayes_eta(records, m.beta);
  const std::size_t failures = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; }));

  json j;
  j["beta"] = m.beta;
  j["eta"] = eta;
  j["failures"] = failures;
  j["manifest_hash"] = hash_hex(hash);
  json recs = json::array();
  for (const auto& r : records) recs.push_back({{"time", r.time}, {"failed", r.failed}});
  j["records"] = std::move(recs);
  std::ofstream out(fs::path(m.out_dir) / "weibayes.json");
  if (!out) throw std::runtime_error("cannot write weibayes.json");
  out << j.dump(2) << '\n';

  write_provenance(m, options, "weibayes");
  std::cout << "eta = " << format_double(eta) << " (beta " << format_double(m.beta) << ", "
            << failures << " failures of " << records.size() << " training records)\n";
  return 0;
}

int cmd_train(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const dataset::CachedFeatures cache = load_features_checked(m, hash);
  const trainer::TrainConfig tc = train_config_from(m.train, cache.beta, cache.eta);

  network::NetworkArchitecture arch;
  arch.input_dim = cache.bin_count;
  arch.hidden_layers = m.train.hidden_layers;
  arch.units_per_layer = m.train.units;
  arch.dropout_prob = m.train.dropout;

  const trainer::FitResult fit =
      trainer::fit(network::init_network(arch, tc.seed), cache.train, cache.validation, tc);
  save_curves(fs::path(m.out_dir) / "train_curves.tsv", fit, hash);
  if (fit.diverged) {
    write_provenance(m, options, "train");
    throw std::runtime_error("training diverged (non-finite loss) after " +
                             std::to_string(fit.epochs_run) + " epochs");
  }

  fs::create_directories(fs::path(m.out_dir) / "checkpoints");
  network::CheckpointMeta meta;
  meta.beta = cache.beta;
  meta.eta = cache.eta;
  meta.scaler_min = cache.scaler.col_min;
  meta.scaler_max = cache.scaler.col_max;
  meta.trial_seed = tc.seed;
  meta.manifest_hash = hash;
  meta.loss_kind = m.train.loss;
  meta.lambda = m.train.lambda;
  network::save_checkpoint(fs::path(m.out_dir) / "checkpoints" / "model.json", fit.state, meta);

  write_provenance(m, options, "train");
  std::cout << "trained " << m.train.loss << " model: stopped at epoch " << fit.stop_epoch
            << " of " << fit.epochs_run << '\n';
  print_metrics_line(std::cout, "train", trainer::evaluate(fit.state, cache.train));
  print_metrics_line(std::cout, "validation", trainer::evaluate(fit.state, cache.validation));
  print_metrics_line(std::cout, "test", trainer::evaluate(fit.state, cache.test));
  return 0;
}

int cmd_search(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const dataset::CachedFeatures cache = load_features_checked(m, hash);

  search::SearchData data;
  data.train = &cache.train;
  data.validation = &cache.validation;
  data.test = &cache.test;
  data.weibull_params = weibull::WeibullParams(cache.beta, cache.eta);

  search::SearchOptions opts;
  opts.workers = options.workers;
  opts.max_epochs = m.search.max_epochs;
  opts.patience = m.search.patience;
  opts.stop_requested = [] { return g_interrupted.load(); };

  g_interrupted.store(false);
  using SignalHandler = void (*)(int);
  const SignalHandler previous = std::signal(SIGINT, handle_sigint);
  search::SearchOutcome outcome;
  try {
    outcome = search::run_search(m.search.space, data, m.search.architectures, m.seed, opts);
  } catch (...) {
    std::signal(SIGINT, previous);
    throw;
  }
  std::signal(SIGINT, previous);

  search::save_results(results_path(m), outcome.results, hash, "search");
  write_provenance(m, options, "search");
  const std::size_t diverged = static_cast<std::size_t>(
      std::count_if(outcome.results.begin(), outcome.results.end(),
                    [](const auto& r) { return r.status == search::TrialStatus::diverged; }));
  std::cout << "search: " << outcome.results.size() << " trials written ("
            << outcome.results.size() - diverged << " ok, " << diverged << " diverged) -> "
            << results_path(m).string() << '\n';
  if (outcome.interrupted) {
    std::cerr << "error: search interrupted; completed trials were preserved\n";
    return 130;
  }
  return 0;
}

int cmd_filter(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const search::LoadedResults loaded = load_results_checked(results_path(m), hash, "search");
  const std::vector<search::TrialResult> kept =
      search::filter_results(loaded.results, m.filter);
  search::save_results(filtered_path(m), kept, hash, "filtered");
  write_provenance(m, options, "filter");
  std::cout << "filter: kept " << kept.size() << " of " << loaded.results.size()
            << " trials (r2 > " << format_double(m.filter.r2_min) << " and rmse < "
            << format_double(m.filter.rmse_max) << " on every split) -> "
            << filtered_path(m).string() << '\n';
  return 0;
}

namespace {

void write_frequency_table(const fs::path& path, std::span<const search::LossFrequency> rows,
                           std::uint64_t hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# rulkit-frequency v1\n# manifest_hash " << hash_hex(hash)
      << "\n# columns loss\twins\tpercent\n";
  for (const auto& row : rows)
    out << losses::loss_kind_name(row.kind) << '\t' << row.wins << '\t'
        << format_double(row.percent) << '\n';
}

void write_correlation_table(const fs::path& path, std::span<const search::TrialResult> filtered,
                             std::uint64_t hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# rulkit-correlation v1\n# manifest_hash " << hash_hex(hash)
      << "\n# columns loss\tr_pb\tp_value\tn_in\tn_out\n";
  for (const losses::LossKind kind : losses::all_loss_kinds) {
    const search::PointBiserial pb = search::point_biserial(filtered, kind);
    out << losses::loss_kind_name(kind) << '\t'
        << (pb.defined ? format_double(pb.r) : "nan") << '\t'
        << (pb.defined ? format_double(pb.p_value) : "nan") << '\t' << pb.n_in << '\t' << pb.n_out
        << '\n';
  }
}

void write_early_stop_table(const fs::path& path, std::span<const search::TrialResult> filtered,
                            std::uint64_t hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# rulkit-early-stopping v1\n# manifest_hash " << hash_hex(hash)
      << "\n# columns group\tcount\tmean\tstd\tmin\tq25\tq50\tq75\tmax\n";
  for (const auto group : {search::LossGroup::traditional, search::LossGroup::weibull}) {
    const search::EpochSummary s = search::early_stop_summary(filtered, group);
    out << (group == search::LossGroup::traditional ? "traditional" : "weibull") << '\t' << s.count
        << '\t' << format_double(s.mean) << '\t' << format_double(s.stddev) << '\t'
        << format_double(s.min) << '\t' << format_double(s.q25) << '\t' << format_double(s.q50)
        << '\t' << format_double(s.q75) << '\t' << format_double(s.max) << '\n';
  }
}

}  // namespace

int cmd_report(const Manifest& m, const GlobalOptions& options) {
  const std::uint64_t hash = manifest_hash(m);
  const search::LoadedResults results = load_results_checked(results_path(m), hash, "search");
  const search::LoadedResults filtered = load_results_checked(filtered_path(m), hash, "filter");
  const dataset::CachedFeatures cache = load_features_checked(m, hash);
  // all inputs proved equal to the current hash, hence to each other

  const fs::path dir = fs::path(m.out_dir) / "report";
  fs::create_directories(dir);
  const auto frequency = search::rank_loss_frequency(filtered.results);
  write_frequency_table(dir / "frequency.tsv", frequency, hash);
  write_correlation_table(dir / "correlation.tsv", filtered.results, hash);
  write_early_stop_table(dir / "early_stopping.tsv", filtered.results, hash);

  std::ofstream summary(dir / "summary.txt");
  if (!summary) throw std::runtime_error("cannot write report summary");
  summary << "trials: " << results.results.size() << " total, " << filtered.results.size()
          << " past the filter\n";
  summary << "weibull fit: beta " << format_double(cache.beta) << ", eta "
          << format_double(cache.eta) << '\n';

  const search::TrialResult* best = best_by_test_r2(filtered.results);
  if (best == nullptr) {
    summary << "no trial survived the filter; no best model to report\n";
    write_provenance(m, options, "report");
    std::cout << "report: no surviving trials -> " << dir.string() << '\n';
    return 0;
  }

  // Re-train the winning trial (training is deterministic in its seed) to
  // recover its curves and prediction traces.
  search::SearchData data;
  data.train = &cache.train;
  data.validation = &cache.validation;
  data.test = &cache.test;
  data.weibull_params = weibull::WeibullParams(cache.beta, cache.eta);

  trainer::TrainConfig tc;
  tc.batch_size = best->config.arch.batch_size;
  tc.learning_rate = best->config.arch.learning_rate;
  tc.max_epochs = m.search.max_epochs;
  tc.patience = m.search.patience;
  tc.seed = best->config.seed;
  tc.loss.kind = best->config.loss;
  tc.loss.lambda = best->config.lambda;
  tc.loss.weibull_params = data.weibull_params;

  network::NetworkArchitecture arch;
  arch.input_dim = cache.bin_count;
  arch.hidden_layers = best->config.arch.hidden_layers;
  arch.units_per_layer = best->config.arch.units;
  arch.dropout_prob = best->config.arch.dropout;

  const trainer::FitResult fit =
      trainer::fit(network::init_network(arch, tc.seed), cache.train, cache.validation, tc);
  save_curves(dir / "best_curves.tsv", fit, hash);

  {
    std::ofstream out(dir / "best_model.tsv");
    if (!out) throw std::runtime_error("cannot write best_model.tsv");
    out << "# rulkit-best-model v1\n# manifest_hash " << hash_hex(hash)
        << "\n# columns trial\tloss\tlambda\thidden_layers\tunits\tdropout\tbatch_size\t"
           "learning_rate\tseed\tstop_epoch\tbeta\teta\ttest_r2\ttest_rmse_pct\n";
    out << best->config.trial_index << '\t' << losses::loss_kind_name(best->config.loss) << '\t'
        << format_double(best->config.lambda) << '\t' << best->config.arch.hidden_layers << '\t'
        << best->config.arch.units << '\t' << format_double(best->config.arch.dropout) << '\t'
        << best->config.arch.batch_size << '\t' << format_double(best->config.arch.learning_rate)
        << '\t' << best->config.seed << '\t' << best->stop_epoch << '\t'
        << format_double(cache.beta) << '\t' << format_double(cache.eta) << '\t'
        << format_double(best->test.r2) << '\t' << format_double(best->test.rmse * 100.0) << '\n';
  }

  {
    // Life percentages (fractions x100) over time, per split.
    std::ofstream out(dir / "best_predictions.tsv");
    if (!out) throw std::runtime_error("cannot write best_predictions.tsv");
    out << "# rulkit-predictions v1\n# manifest_hash " << hash_hex(hash)
        << "\n# columns split\trun_id\ttime\tlabel_pct\tprediction_pct\n";
    for (const dataset::FeatureSet* fs_ptr : {&cache.train, &cache.validation, &cache.test}) {
      const std::vector<double> preds = network::predict(fit.state, fs_ptr->features);
      for (std::size_t r = 0; r < preds.size(); ++r)
        out << dataset::split_name(fs_ptr->split) << '\t' << fs_ptr->run_ids[r] << '\t'
            << format_double(fs_ptr->sample_times[r]) << '\t'
            << format_double(fs_ptr->labels[r] * 100.0) << '\t'
            << format_double(preds[r] * 100.0) << '\n';
    }
  }

  summary << "best model: " << losses::loss_kind_name(best->config.loss) << " (trial "
          << best->config.trial_index << "), " << best->config.arch.hidden_layers << " layers x "
          << best->config.arch.units << " units, dropout "
          << format_double(best->config.arch.dropout) << ", lambda "
          << format_double(best->config.lambda) << '\n';
  summary << "best test r2 " << format_double(best->test.r2) << ", test rmse "
          << format_double(best->test.rmse * 100.0) << "%\n";
  summary << "loss-kind wins: ";
  bool first = true;
  for (const auto& row : frequency) {
    if (row.wins == 0) continue;
    if (!first) summary << ", ";
    summary << losses::loss_kind_name(row.kind) << " " << row.wins;
    first = false;
  }
  summary << '\n';

  write_provenance(m, options, "report");
  std::cout << "report: " << filtered.results.size() << " surviving trials, best "
            << losses::loss_kind_name(best->config.loss) << " (test r2 "
            << format_double(best->test.r2) << ") -> " << dir.string() << '\n';
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"bearing remaining-useful-life prognostics toolkit"};
  app.require_subcommand(1);

  GlobalOptions options;
  std::uint64_t seed_value = 0;
  std::string out_value;

  struct Handler {
    const char* name;
    const char* description;
    int (*run)(const Manifest&, const GlobalOptions&);
  };
  const Handler handlers[] = {
      {"synth", "synthesize run-to-failure data", cmd_synth},
      {"ingest", "normalize raw dataset directories into runs", cmd_ingest},
      {"features", "featurize runs into the model-ready cache", cmd_features},
      {"weibayes", "fit the Weibull scale from training runs", cmd_weibayes},
      {"train", "train the single model described by the manifest", cmd_train},
      {"search", "run the random hyperparameter search", cmd_search},
      {"filter", "apply the performance thresholds to search results", cmd_filter},
      {"report", "rank losses and summarize the surviving trials", cmd_report},
  };

  for (const Handler& handler : handlers) {
    CLI::App* sub = app.add_subcommand(handler.name, handler.description);
    sub->add_option("--manifest", options.manifest_path, "manifest JSON path")->required();
    sub->add_option("--seed", seed_value, "override the manifest seed");
    sub->add_option("--workers", options.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_value, "override the manifest output directory");
    sub->parse_complete_callback([&options, sub, &seed_value, &out_value] {
      if (sub->count("--seed") > 0) options.seed_override = seed_value;
      if (sub->count("--out") > 0) options.out_override = out_value;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const Manifest manifest = effective_manifest(options);
    std::filesystem::create_directories(manifest.out_dir);
    for (const Handler& handler : handlers)
      if (app.get_subcommand(handler.name)->parsed()) return handler.run(manifest, options);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rulkit::cli
