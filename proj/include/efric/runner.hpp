// Command dispatch: loads a manifest, runs one pipeline and writes its
// artifacts, run_report.json and diagnostics.txt into the output directory.
#pragma once

#include <optional>
#include <string>

#include "efric/manifest.hpp"

namespace efric::cli {

enum ExitCode { exit_ok = 0, exit_invariant = 1, exit_config = 2, exit_numerical = 3 };

struct RunRequest {
  std::optional<Command> command;
  std::string manifest_path;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool plot = false;
};

// Thread count precedence: request, manifest, EFRIC_THREADS, then 1.
int resolve_threads(const RunRequest& r, const Manifest* m);

// Never throws; every failure maps to an exit code and is recorded in
// diagnostics.txt.
int run(const RunRequest& r);

}  // namespace efric::cli
