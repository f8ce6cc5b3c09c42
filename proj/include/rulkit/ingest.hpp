#pragma once

#include <filesystem>
#include <string>

#include "rulkit/dataset.hpp"

namespace rulkit::dataset {

// On-disk layouts of the two public run-to-failure corpora.
//  - ims: one whitespace/tab-delimited file per snapshot, the acquisition
//    timestamp encoded in the filename as YYYY.MM.DD.HH.MM.SS, one column
//    per channel.
//  - pronostia: acc_XXXXX.csv per snapshot, comma-delimited, columns
//    hour, minute, second, microsecond, horizontal acc, vertical acc.
enum class IngestFormat { ims, pronostia };

struct IngestConfig {
  IngestFormat format = IngestFormat::ims;
  std::size_t channel = 0;       // column holding the acceleration samples
  double sample_rate = 20480.0;  // Hz
};

// Reads every snapshot file under `dir` (sorted by name), stamps window
// times relative to the first snapshot, and returns one Run. total_runtime
// is the last window's start plus the window duration.
Run ingest_run(const std::filesystem::path& dir, const IngestConfig& config, std::string id,
               bool failed);

}  // namespace rulkit::dataset
