#include "rulkit/feature_cache.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rulkit/textio.hpp"

namespace rulkit::dataset {

namespace {

constexpr std::string_view kMagic = "# rulkit-features v1";

void append_row(std::string& out, const FeatureSet& fs, std::size_t r) {
  out += split_name(fs.split);
  out += '\t';
  out += fs.run_ids[r];
  out += '\t';
  out += format_double(fs.sample_times[r]);
  out += '\t';
  out += format_double(fs.sample_total_runtime[r]);
  out += '\t';
  out += format_double(fs.labels[r]);
  for (std::size_t c = 0; c < fs.features.cols(); ++c) {
    out += '\t';
    out += format_double(fs.features(r, c));
  }
  out += '\n';
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += '\t';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> parse_doubles(std::string_view text) {
  std::vector<double> out;
  for (const auto field : split_fields(text, '\t')) out.push_back(parse_double(field));
  return out;
}

struct RowAccumulator {
  std::vector<std::vector<double>> rows;
  std::vector<double> labels, times, totals;
  std::vector<std::string> ids;
};

FeatureSet finish(Split split, RowAccumulator&& acc, std::size_t bin_count) {
  FeatureSet fs;
  fs.split = split;
  fs.features = Matrix(acc.rows.size(), bin_count);
  for (std::size_t r = 0; r < acc.rows.size(); ++r)
    for (std::size_t c = 0; c < bin_count; ++c) fs.features(r, c) = acc.rows[r][c];
  fs.labels = std::move(acc.labels);
  fs.sample_times = std::move(acc.times);
  fs.sample_total_runtime = std::move(acc.totals);
  fs.run_ids = std::move(acc.ids);
  return fs;
}

}  // namespace

void save_features(const std::filesystem::path& path, const CachedFeatures& cache) {
  if (cache.bin_count == 0) throw std::invalid_argument("save_features: bin_count must be positive");

  std::string body;
  for (const FeatureSet* fs : {&cache.train, &cache.validation, &cache.test})
    for (std::size_t r = 0; r < fs->features.rows(); ++r) append_row(body, *fs, r);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_features: cannot write " + path.string());
  out << kMagic << '\n';
  out << "# manifest_hash " << hash_hex(cache.manifest_hash) << '\n';
  out << "# bin_count " << cache.bin_count << '\n';
  out << "# beta " << format_double(cache.beta) << '\n';
  out << "# eta " << format_double(cache.eta) << '\n';
  out << "# scaler_min " << join_doubles(cache.scaler.col_min) << '\n';
  out << "# scaler_max " << join_doubles(cache.scaler.col_max) << '\n';
  out << "# content_hash " << hash_hex(fnv1a64(body)) << '\n';
  out << "# columns split\trun_id\ttime\ttotal_runtime\tlabel\tf0..f" << cache.bin_count - 1 << '\n';
  out << body;
  if (!out) throw std::runtime_error("save_features: write failed for " + path.string());
}

CachedFeatures load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_features: cannot open " + path.string());

  CachedFeatures cache;
  std::string expected_hash;
  std::string line;
  if (!std::getline(in, line) || line != kMagic)
    throw std::runtime_error("load_features: " + path.string() + " is not a feature cache");

  std::string body;
  RowAccumulator acc[3];
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto rest = std::string_view(line).substr(2);
      const auto space = rest.find(' ');
      const auto key = rest.substr(0, space);
      const auto value = space == std::string_view::npos ? std::string_view{} : rest.substr(space + 1);
      if (key == "manifest_hash") cache.manifest_hash = parse_u64_hex(value);
      else if (key == "bin_count") cache.bin_count = static_cast<std::size_t>(parse_u64(value));
      else if (key == "beta") cache.beta = parse_double(value);
      else if (key == "eta") cache.eta = parse_double(value);
      else if (key == "scaler_min") cache.scaler.col_min = parse_doubles(value);
      else if (key == "scaler_max") cache.scaler.col_max = parse_doubles(value);
      else if (key == "content_hash") expected_hash = std::string(value);
      // unknown keys (e.g. the columns note) are ignored
      continue;
    }
    body += line;
    body += '\n';
    const auto fields = split_fields(line, '\t');
    if (cache.bin_count == 0 || fields.size() != 5 + cache.bin_count)
      throw std::runtime_error("load_features: malformed row in " + path.string());
    const auto split = split_from_name(fields[0]);
    if (!split) throw std::runtime_error("load_features: unknown split '" + std::string(fields[0]) + "'");
    RowAccumulator& dst = acc[static_cast<std::size_t>(*split)];
    dst.ids.emplace_back(fields[1]);
    dst.times.push_back(parse_double(fields[2]));
    dst.totals.push_back(parse_double(fields[3]));
    dst.labels.push_back(parse_double(fields[4]));
    std::vector<double> row(cache.bin_count);
    for (std::size_t c = 0; c < cache.bin_count; ++c) row[c] = parse_double(fields[5 + c]);
    dst.rows.push_back(std::move(row));
  }

  if (expected_hash.empty())
    throw std::runtime_error("load_features: " + path.string() + " has no content hash");
  if (hash_hex(fnv1a64(body)) != expected_hash)
    throw std::runtime_error("load_features: content hash mismatch in " + path.string() +
                             "; the cache is corrupt or was edited");
  if (cache.scaler.col_min.size() != cache.bin_count || cache.scaler.col_max.size() != cache.bin_count)
    throw std::runtime_error("load_features: scaler statistics missing in " + path.string());
  for (std::size_t c = 0; c < cache.bin_count; ++c)
    if (cache.scaler.col_min[c] == cache.scaler.col_max[c]) cache.scaler.degenerate_columns.push_back(c);

  cache.train = finish(Split::train, std::move(acc[0]), cache.bin_count);
  cache.validation = finish(Split::validation, std::move(acc[1]), cache.bin_count);
  cache.test = finish(Split::test, std::move(acc[2]), cache.bin_count);
  if (cache.train.features.rows() == 0)
    throw std::runtime_error("load_features: " + path.string() + " has no training rows");
  return cache;
}

namespace {

constexpr std::string_view kRunMagic = "# rulkit-run v1";

}  // namespace

void save_run(const std::filesystem::path& path, const Run& run, std::uint64_t manifest_hash) {
  validate_run(run);
  std::string body;
  for (std::size_t w = 0; w < run.windows.size(); ++w) {
    body += format_double(run.times[w]);
    for (const double s : run.windows[w].samples) {
      body += '\t';
      body += format_double(s);
    }
    body += '\n';
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_run: cannot write " + path.string());
  out << kRunMagic << '\n';
  out << "# id " << run.id << '\n';
  out << "# sample_rate " << format_double(run.windows.front().sample_rate) << '\n';
  out << "# total_runtime " << format_double(run.total_runtime) << '\n';
  out << "# failed " << (run.failed ? 1 : 0) << '\n';
  out << "# manifest_hash " << hash_hex(manifest_hash) << '\n';
  out << "# content_hash " << hash_hex(fnv1a64(body)) << '\n';
  out << body;
  if (!out) throw std::runtime_error("save_run: write failed for " + path.string());
}

LoadedRun load_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunMagic)
    throw std::runtime_error("load_run: " + path.string() + " is not a run file");

  LoadedRun loaded;
  double sample_rate = 1.0;
  std::string expected_hash;
  std::string body;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto rest = std::string_view(line).substr(2);
      const auto space_pos = rest.find(' ');
      const auto key = rest.substr(0, space_pos);
      const auto value =
          space_pos == std::string_view::npos ? std::string_view{} : rest.substr(space_pos + 1);
      if (key == "id") loaded.run.id = std::string(value);
      else if (key == "sample_rate") sample_rate = parse_double(value);
      else if (key == "total_runtime") loaded.run.total_runtime = parse_double(value);
      else if (key == "failed") loaded.run.failed = value == "1";
      else if (key == "manifest_hash") loaded.manifest_hash = parse_u64_hex(value);
      else if (key == "content_hash") expected_hash = std::string(value);
      continue;
    }
    body += line;
    body += '\n';
    const auto fields = split_fields(line, '\t');
    if (fields.size() < 2)
      throw std::runtime_error("load_run: malformed window row in " + path.string());
    loaded.run.times.push_back(parse_double(fields[0]));
    signal::RawWindow window;
    window.sample_rate = sample_rate;
    window.samples.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      window.samples.push_back(parse_double(fields[i]));
    loaded.run.windows.push_back(std::move(window));
  }
  if (expected_hash.empty())
    throw std::runtime_error("load_run: " + path.string() + " has no content hash");
  if (hash_hex(fnv1a64(body)) != expected_hash)
    throw std::runtime_error("load_run: content hash mismatch in " + path.string() +
                             "; the file is corrupt or was edited");
  validate_run(loaded.run);
  return loaded;
}

}  // namespace rulkit::dataset
