#pragma once

// Named experiments driven by a resolved Config. Each produces one or more
// tables; write_outputs puts them in a directory next to a metadata file.

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "wgarray/config.hpp"
#include "wgarray/table.hpp"

namespace wgarray {

/// Rate-limited progress lines on stderr. Thread-safe.
class Progress {
 public:
  Progress(bool quiet, double interval_seconds, std::string label);
  /// Prints `message` if at least the interval has passed since the last
  /// line, or always when `force` is set. Nothing is printed when quiet.
  void note(const std::string& message, bool force = false);

 private:
  bool quiet_;
  double interval_;
  std::string label_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point last_{};
  bool printed_ = false;
};

struct RunContext {
  unsigned workers = 1;
  Progress* progress = nullptr;
};

/// Worker count from WGARRAY_WORKERS, falling back to the hardware
/// concurrency (at least 1).
unsigned default_workers();

std::vector<Table> run_experiment(const Config& config, RunContext& context);

/// Writes <dir>/<table>.csv (and .json when the config asks for it) plus
/// <dir>/metadata.json with the resolved config, version and seed. Returns
/// the paths written.
std::vector<std::string> write_outputs(const Config& config, const std::vector<Table>& tables,
                                       const std::string& dir);

}  // namespace wgarray
