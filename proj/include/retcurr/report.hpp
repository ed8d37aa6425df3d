#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace retcurr {

// One metrics.csv row, as read back from a run directory.
struct MetricsRow {
  int iteration = 0;
  int g = 0;
  std::optional<double> window_mean;
  double zero_adv_fraction = 0.0;
  long long cumulative_ignored = 0;
  bool upgraded = false;
  std::optional<double> eval_accuracy;
};

struct RunMetrics {
  std::string name;
  std::vector<MetricsRow> rows;
};

std::vector<MetricsRow> parse_metrics_csv(std::string_view csv);

// Reads metrics.csv from a run directory; run.json must also be present.
RunMetrics load_run(const std::filesystem::path& run_dir);

struct Report {
  std::vector<RunMetrics> runs;
  std::size_t aligned_rows = 0;
  std::vector<std::string> warnings;
};

// Aligns runs on the shorter iteration count. Duplicate run names get a
// numeric suffix.
Report build_report(std::vector<RunMetrics> runs);

// iteration, then zero_adv_fraction, eval_accuracy, g per run. Columns carry
// a _<name> suffix when more than one run is compared.
std::string report_csv(const Report& report);
std::string report_summary_json(const Report& report);

}  // namespace retcurr
