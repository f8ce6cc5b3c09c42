#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rulkit/commands.hpp"
#include "rulkit/feature_cache.hpp"
#include "rulkit/network.hpp"
#include "rulkit/search.hpp"

using namespace rulkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() /
           (std::string("rulkit-cli-") + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Commands narrate to the standard streams; keep test output clean and make
// the narration assertable.
struct CaptureStreams {
  std::ostringstream out, err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  CaptureStreams()
      : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~CaptureStreams() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("rulkit");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json small_manifest(const fs::path& out_dir) {
  nlohmann::json j;
  j["out_dir"] = out_dir.string();
  j["seed"] = 42;
  j["features"] = {{"bin_count", 8}, {"kaiser_shape", 14.0}};
  j["weibull"] = {{"beta", 2.0}};
  j["data"] = {{"mode", "synth"},
               {"synth",
                {{"runs", 8},
                 {"windows_per_run", 12},
                 {"window_length", 64},
                 {"sample_rate", 2048.0},
                 {"weibull_beta", 2.0},
                 {"weibull_eta", 100.0},
                 {"horizon", 134.0},
                 {"base_freq", 100.0},
                 {"drift_freq", 400.0},
                 {"fault_freq", 700.0}}},
               {"split_counts", {4, 2, 2}}};
  j["train"] = {{"batch_size", 32}, {"learning_rate", 0.01},  {"max_epochs", 30},
                {"patience", 10},   {"loss", "W-MSE-Comb"},   {"lambda", 1.0},
                {"hidden_layers", 2}, {"units", 16},          {"dropout", 0.0}};
  j["search"] = {{"architectures", 2},
                 {"max_epochs", 5},
                 {"patience", 3},
                 {"space",
                  {{"batch_sizes", {32}},
                   {"learning_rates", {0.01}},
                   {"min_hidden_layers", 2},
                   {"max_hidden_layers", 2},
                   {"units", {8}},
                   {"dropout", {0.1}}}}};
  j["filter"] = {{"r2_min", -5.0}, {"rmse_max", 5.0}};
  return j;
}

fs::path write_manifest(const fs::path& dir, const nlohmann::json& j) {
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pipeline runs end to end with reproducible artifacts") {
  TempDir tmp("pipeline");
  const fs::path out_dir = tmp.path / "out";
  const fs::path manifest = write_manifest(tmp.path, small_manifest(out_dir));
  const std::string mpath = manifest.string();

  CaptureStreams capture;
  REQUIRE(run({"synth", "--manifest", mpath}) == 0);
  CHECK(capture.out.str().find("synthesized 8 runs") != std::string::npos);
  REQUIRE(fs::exists(out_dir / "runs" / "synth-000.run"));
  REQUIRE(fs::exists(out_dir / "runs" / "synth-007.run"));

  REQUIRE(run({"features", "--manifest", mpath}) == 0);
  const dataset::CachedFeatures cache = dataset::load_features(out_dir / "features.tsv");
  CHECK(cache.train.features.rows() == 48);
  CHECK(cache.validation.features.rows() == 24);
  CHECK(cache.test.features.rows() == 24);
  CHECK(cache.train.features.cols() == 8);
  CHECK(cache.beta == 2.0);
  CHECK(cache.eta > 0.0);

  REQUIRE(run({"weibayes", "--manifest", mpath}) == 0);
  {
    std::ifstream in(out_dir / "weibayes.json");
    REQUIRE(in.good());
    nlohmann::json wj;
    in >> wj;
    CHECK(wj.at("beta").get<double>() == 2.0);
    // Both commands fit the scale from the same training records.
    CHECK(wj.at("eta").get<double>() == cache.eta);
    CHECK(wj.at("records").size() == 4);
  }

  REQUIRE(run({"train", "--manifest", mpath}) == 0);
  REQUIRE(fs::exists(out_dir / "train_curves.tsv"));
  {
    const auto [state, meta] = network::load_checkpoint(out_dir / "checkpoints" / "model.json");
    CHECK(meta.loss_kind == "W-MSE-Comb");
    CHECK(meta.lambda == 1.0);
    CHECK(meta.beta == 2.0);
    CHECK(meta.eta == cache.eta);
    CHECK(state.arch.input_dim == 8);
    CHECK(state.arch.units_per_layer == 16);
  }

  REQUIRE(run({"search", "--manifest", mpath, "--workers", "2"}) == 0);
  const search::LoadedResults results = search::load_results(out_dir / "results.tsv");
  CHECK(results.results.size() == 18);
  CHECK(results.table_kind == "search");

  // Report refuses to run ahead of the filter step.
  {
    cli::GlobalOptions options;
    options.manifest_path = mpath;
    const cli::Manifest m = cli::effective_manifest(options);
    CHECK(results.manifest_hash == cli::manifest_hash(m));
    CHECK_THROWS_WITH_AS(cli::cmd_report(m, options),
                         doctest::Contains("run `rulkit filter` first"), std::runtime_error);
  }

  REQUIRE(run({"filter", "--manifest", mpath}) == 0);
  const search::LoadedResults filtered = search::load_results(out_dir / "filtered.tsv");
  CHECK(filtered.table_kind == "filtered");
  CHECK(filtered.results.size() <= 18);
  REQUIRE(filtered.results.size() > 0);

  REQUIRE(run({"report", "--manifest", mpath}) == 0);
  for (const char* name : {"frequency.tsv", "correlation.tsv", "early_stopping.tsv",
                           "summary.txt", "best_curves.tsv", "best_model.tsv",
                           "best_predictions.tsv"})
    CHECK(fs::exists(out_dir / "report" / name));
  {
    const std::string summary = slurp(out_dir / "report" / "summary.txt");
    CHECK(summary.find("trials: 18 total") != std::string::npos);
    CHECK(summary.find("best model:") != std::string::npos);
  }

  for (const char* name :
       {"synth", "features", "weibayes", "train", "search", "filter", "report"})
    CHECK(fs::exists(out_dir / "provenance" / (std::string(name) + ".json")));

  // A rerun from scratch rebuilds byte-identical artifacts.
  const std::string features_bytes = slurp(out_dir / "features.tsv");
  const std::string results_bytes = slurp(out_dir / "results.tsv");
  fs::remove_all(out_dir);
  REQUIRE(run({"synth", "--manifest", mpath}) == 0);
  REQUIRE(run({"features", "--manifest", mpath}) == 0);
  REQUIRE(run({"search", "--manifest", mpath, "--workers", "1"}) == 0);
  CHECK(slurp(out_dir / "features.tsv") == features_bytes);
  CHECK(slurp(out_dir / "results.tsv") == results_bytes);
}

TEST_CASE("commands explain missing prerequisites") {
  TempDir tmp("prereq");
  const fs::path out_dir = tmp.path / "out";
  const fs::path manifest = write_manifest(tmp.path, small_manifest(out_dir));

  cli::GlobalOptions options;
  options.manifest_path = manifest.string();
  const cli::Manifest m = cli::effective_manifest(options);

  CHECK_THROWS_WITH_AS(cli::cmd_features(m, options),
                       doctest::Contains("run `rulkit synth` or `rulkit ingest` first"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_weibayes(m, options),
                       doctest::Contains("run `rulkit synth` or `rulkit ingest` first"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_train(m, options),
                       doctest::Contains("run `rulkit features` first"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_search(m, options),
                       doctest::Contains("run `rulkit features` first"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_filter(m, options),
                       doctest::Contains("run `rulkit search` first"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_report(m, options),
                       doctest::Contains("run `rulkit search` first"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_ingest(m, options),
                       doctest::Contains("use `rulkit synth` instead"), std::runtime_error);

  nlohmann::json real = small_manifest(out_dir);
  real["data"]["mode"] = "real";
  real["data"]["runs"] = {{{"id", "b1"}, {"path", (tmp.path / "raw").string()}}};
  const fs::path real_manifest = tmp.path / "real.json";
  std::ofstream(real_manifest) << real.dump(2);
  cli::GlobalOptions real_options;
  real_options.manifest_path = real_manifest.string();
  const cli::Manifest rm = cli::effective_manifest(real_options);
  CHECK_THROWS_WITH_AS(cli::cmd_synth(rm, real_options),
                       doctest::Contains("use `rulkit ingest` instead"), std::runtime_error);

  CaptureStreams capture;
  CHECK(run({"train", "--manifest", manifest.string()}) == 1);
  CHECK(capture.err.str().find("error:") != std::string::npos);
  CHECK(capture.err.str().find("run `rulkit features` first") != std::string::npos);
}

TEST_CASE("artifacts from a different configuration are refused") {
  TempDir tmp("hashes");
  const fs::path out_dir = tmp.path / "out";
  const fs::path manifest = write_manifest(tmp.path, small_manifest(out_dir));
  const std::string mpath = manifest.string();

  CaptureStreams capture;
  REQUIRE(run({"synth", "--manifest", mpath}) == 0);
  REQUIRE(run({"features", "--manifest", mpath}) == 0);

  cli::GlobalOptions options;
  options.manifest_path = mpath;
  options.seed_override = 43;
  const cli::Manifest m = cli::effective_manifest(options);
  CHECK_THROWS_WITH_AS(cli::cmd_train(m, options),
                       doctest::Contains("regenerate the pipeline from the data step"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cli::cmd_features(m, options),
                       doctest::Contains("regenerate the pipeline from the data step"),
                       std::runtime_error);
  CHECK(run({"train", "--manifest", mpath, "--seed", "43"}) == 1);
  CHECK(capture.err.str().find("regenerate the pipeline from the data step") !=
        std::string::npos);
}

TEST_CASE("overrides change the effective manifest coherently") {
  TempDir tmp("overrides");
  const fs::path manifest = write_manifest(tmp.path, small_manifest(tmp.path / "out"));

  cli::GlobalOptions base;
  base.manifest_path = manifest.string();
  const cli::Manifest m0 = cli::effective_manifest(base);
  CHECK(m0.seed == 42);
  CHECK(m0.train.seed == 42);

  cli::GlobalOptions reseeded = base;
  reseeded.seed_override = 43;
  const cli::Manifest m1 = cli::effective_manifest(reseeded);
  CHECK(m1.seed == 43);
  // The single-model seed follows the master seed unless pinned.
  CHECK(m1.train.seed == 43);
  CHECK(cli::manifest_hash(m1) != cli::manifest_hash(m0));

  cli::GlobalOptions moved = base;
  moved.out_override = (tmp.path / "elsewhere").string();
  const cli::Manifest m2 = cli::effective_manifest(moved);
  CHECK(m2.out_dir == (tmp.path / "elsewhere").string());
  // Moving artifacts must not change their identity.
  CHECK(cli::manifest_hash(m2) == cli::manifest_hash(m0));
}

TEST_CASE("argument errors exit nonzero without running") {
  TempDir tmp("args");
  const fs::path manifest = write_manifest(tmp.path, small_manifest(tmp.path / "out"));

  CaptureStreams capture;
  CHECK(run({}) != 0);
  CHECK(run({"frobnicate", "--manifest", manifest.string()}) != 0);
  CHECK(run({"synth"}) != 0);
  CHECK(run({"synth", "--manifest", manifest.string(), "--workers", "0"}) != 0);
  CHECK(run({"synth", "--manifest", (tmp.path / "absent.json").string()}) == 1);
  CHECK(capture.err.str().find("cannot open") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "out" / "runs"));
}
