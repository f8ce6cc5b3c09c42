#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rulkit/manifest.hpp"

namespace rulkit::cli {

// Flags shared by every subcommand. Overrides are applied to the loaded
// manifest before hashing, so artifacts record the effective configuration;
// workers and the output directory never affect the hash.
struct GlobalOptions {
  std::string manifest_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::size_t workers = 1;
};

// Loads the manifest and applies overrides.
Manifest effective_manifest(const GlobalOptions& options);

int cmd_synth(const Manifest& manifest, const GlobalOptions& options);
int cmd_ingest(const Manifest& manifest, const GlobalOptions& options);
int cmd_features(const Manifest& manifest, const GlobalOptions& options);
int cmd_weibayes(const Manifest& manifest, const GlobalOptions& options);
int cmd_train(const Manifest& manifest, const GlobalOptions& options);
int cmd_search(const Manifest& manifest, const GlobalOptions& options);
int cmd_filter(const Manifest& manifest, const GlobalOptions& options);
int cmd_report(const Manifest& manifest, const GlobalOptions& options);

// Full argv-level entry point (CLI11 parsing, dispatch, error reporting).
// Returns the process exit code; nonzero exactly when an error was printed.
int run_cli(int argc, const char* const* argv);

}  // namespace rulkit::cli
