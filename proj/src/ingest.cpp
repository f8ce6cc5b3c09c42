#include "rulkit/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rulkit/textio.hpp"

namespace rulkit::dataset {

namespace {

namespace fs = std::filesystem;

// Days since 1970-01-01 for a proleptic Gregorian date; no timezone, no
// libc dependence, so filename timestamps decode identically everywhere.
long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097L + static_cast<long>(doe) - 719468L;
}

// IMS snapshot names encode the acquisition time: 2004.02.12.10.32.39.
double timestamp_from_ims_name(const std::string& name) {
  int y, mo, d, h, mi, s;
  if (std::sscanf(name.c_str(), "%4d.%2d.%2d.%2d.%2d.%2d", &y, &mo, &d, &h, &mi, &s) != 6)
    throw std::runtime_error("file name '" + name + "' is not an IMS timestamp (YYYY.MM.DD.HH.MM.SS)");
  return static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d))) *
             86400.0 +
         h * 3600.0 + mi * 60.0 + s;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  return s;
}

struct Snapshot {
  double timestamp = 0.0;
  std::vector<double> samples;
};

Snapshot read_snapshot(const fs::path& file, const IngestConfig& config) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());

  Snapshot snap;
  const bool pronostia = config.format == IngestFormat::pronostia;
  std::string line;
  std::size_t lineno = 0;
  bool have_timestamp = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::vector<std::string_view> fields;
    if (pronostia) {
      fields = split_fields(trimmed, ',');
      for (auto& f : fields) f = trim(f);
    } else {
      fields = split_whitespace(trimmed);
    }
    const std::size_t min_cols = pronostia ? std::max<std::size_t>(config.channel + 1, 4) : config.channel + 1;
    if (fields.size() < min_cols)
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": expected at least " +
                               std::to_string(min_cols) + " columns, got " +
                               std::to_string(fields.size()));
    try {
      if (pronostia && !have_timestamp) {
        // hour, minute, second, microsecond columns of the first row
        snap.timestamp = parse_double(fields[0]) * 3600.0 + parse_double(fields[1]) * 60.0 +
                         parse_double(fields[2]) + parse_double(fields[3]) * 1e-6;
        have_timestamp = true;
      }
      snap.samples.push_back(parse_double(fields[config.channel]));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (snap.samples.empty()) throw std::runtime_error(file.string() + ": no samples");
  if (!pronostia) snap.timestamp = timestamp_from_ims_name(file.filename().string());
  return snap;
}

}  // namespace

Run ingest_run(const fs::path& dir, const IngestConfig& config, std::string id, bool failed) {
  if (!(config.sample_rate > 0.0))
    throw std::invalid_argument("ingest_run: sample_rate must be positive");
  if (!fs::is_directory(dir))
    throw std::runtime_error("ingest_run: " + dir.string() + " is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (config.format == IngestFormat::pronostia && name.rfind("acc_", 0) != 0)
      continue;  // PRONOSTIA dirs also hold temperature files
    files.push_back(entry.path());
  }
  if (files.empty())
    throw std::runtime_error("ingest_run: no snapshot files in " + dir.string());
  std::sort(files.begin(), files.end());

  Run run;
  run.id = std::move(id);
  run.failed = failed;

  double first_timestamp = 0.0;
  double prev_timestamp = 0.0;
  double rollover = 0.0;
  std::size_t expected_len = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Snapshot snap = read_snapshot(files[i], config);
    if (i == 0) {
      first_timestamp = snap.timestamp;
      expected_len = snap.samples.size();
    } else {
      if (snap.samples.size() != expected_len)
        throw std::runtime_error("ingest_run: " + files[i].string() + " has " +
                                 std::to_string(snap.samples.size()) + " samples, expected " +
                                 std::to_string(expected_len));
      // PRONOSTIA clock timestamps are time of day; a run crossing midnight
      // wraps, so one day is added whenever the clock steps backwards.
      if (config.format == IngestFormat::pronostia && snap.timestamp + rollover < prev_timestamp)
        rollover += 86400.0;
    }
    const double t = snap.timestamp + rollover;
    if (i > 0 && t <= prev_timestamp)
      throw std::runtime_error("ingest_run: non-monotonic timestamps at " + files[i].string());
    prev_timestamp = t;

    signal::RawWindow window;
    window.sample_rate = config.sample_rate;
    window.samples = std::move(snap.samples);
    run.windows.push_back(std::move(window));
    run.times.push_back(t - first_timestamp);
  }

  const double window_duration = static_cast<double>(expected_len) / config.sample_rate;
  run.total_runtime = run.times.back() + window_duration;
  validate_run(run);
  return run;
}

}  // namespace rulkit::dataset
