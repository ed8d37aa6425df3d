#include "retcurr/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <nlohmann/json.hpp>
#include <set>

#include "retcurr/corpus.hpp"
#include "retcurr/error.hpp"

namespace retcurr {

namespace {

constexpr std::string_view kMetricsHeader =
    "iteration,g,window_mean,zero_adv_fraction,cumulative_ignored,upgraded,eval_accuracy";

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(ErrorKind::kParse, fmt::format("metrics.csv:{}: bad number '{}'", line_no, field));
  }
  return value;
}

std::optional<double> parse_optional(std::string_view field, std::size_t line_no) {
  if (field.empty()) return std::nullopt;
  return parse_number<double>(field, line_no);
}

std::string fixed(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(std::string_view csv) {
  std::vector<MetricsRow> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool have_header = false;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    auto line = csv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!have_header) {
      if (line != kMetricsHeader) {
        fail(ErrorKind::kParse, "metrics.csv: unexpected header " + std::string(line));
      }
      have_header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) {
      fail(ErrorKind::kParse, fmt::format("metrics.csv:{}: expected 7 fields", line_no));
    }
    MetricsRow r;
    r.iteration = parse_number<int>(f[0], line_no);
    r.g = parse_number<int>(f[1], line_no);
    r.window_mean = parse_optional(f[2], line_no);
    r.zero_adv_fraction = parse_number<double>(f[3], line_no);
    r.cumulative_ignored = parse_number<long long>(f[4], line_no);
    r.upgraded = parse_number<int>(f[5], line_no) != 0;
    r.eval_accuracy = parse_optional(f[6], line_no);
    rows.push_back(r);
  }
  if (!have_header) fail(ErrorKind::kParse, "metrics.csv: missing header");
  return rows;
}

RunMetrics load_run(const std::filesystem::path& run_dir) {
  if (!std::filesystem::exists(run_dir / "run.json")) {
    fail(ErrorKind::kIo, "missing " + (run_dir / "run.json").string());
  }
  try {
    const auto meta = nlohmann::json::parse(read_file(run_dir / "run.json"));
    require(meta.is_object(), (run_dir / "run.json").string() + ": expected an object");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, (run_dir / "run.json").string() + ": " + e.what());
  }
  RunMetrics run;
  auto dir = run_dir;
  if (!dir.has_filename()) dir = dir.parent_path();
  run.name = dir.filename().string();
  run.rows = parse_metrics_csv(read_file(run_dir / "metrics.csv"));
  return run;
}

Report build_report(std::vector<RunMetrics> runs) {
  require(!runs.empty(), "report: at least one run is required");
  Report rep;
  std::set<std::string> seen;
  for (auto& r : runs) {
    std::string name = r.name.empty() ? "run" : r.name;
    for (int i = 2; seen.count(name); ++i) name = fmt::format("{}_{}", r.name, i);
    seen.insert(name);
    r.name = name;
  }
  std::size_t shortest = runs.front().rows.size();
  for (const auto& r : runs) shortest = std::min(shortest, r.rows.size());
  for (const auto& r : runs) {
    if (r.rows.size() != shortest) {
      rep.warnings.push_back(fmt::format("run {} has {} iterations; aligned on the first {}",
                                         r.name, r.rows.size(), shortest));
    }
  }
  for (std::size_t i = 0; i < shortest; ++i) {
    for (const auto& r : runs) {
      if (r.rows[i].iteration != runs.front().rows[i].iteration) {
        fail(ErrorKind::kValidation,
             fmt::format("report: run {} row {} has iteration {} but {} has {}", r.name, i + 1,
                         r.rows[i].iteration, runs.front().name,
                         runs.front().rows[i].iteration));
      }
    }
  }
  rep.aligned_rows = shortest;
  rep.runs = std::move(runs);
  return rep;
}

std::string report_csv(const Report& report) {
  const bool suffix = report.runs.size() > 1;
  std::string out = "iteration";
  for (const auto& r : report.runs) {
    const std::string s = suffix ? "_" + r.name : "";
    out += fmt::format(",zero_adv_fraction{0},eval_accuracy{0},g{0}", s);
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < report.aligned_rows; ++i) {
    out += std::to_string(report.runs.front().rows[i].iteration);
    for (const auto& r : report.runs) {
      const auto& row = r.rows[i];
      out += fmt::format(",{:.6f},{},{}", row.zero_adv_fraction, fixed(row.eval_accuracy), row.g);
    }
    out.push_back('\n');
  }
  return out;
}

std::string report_summary_json(const Report& report) {
  nlohmann::ordered_json j;
  j["aligned_iterations"] = report.aligned_rows;
  j["warnings"] = report.warnings;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : report.runs) {
    nlohmann::ordered_json o;
    o["name"] = r.name;
    o["iterations"] = r.rows.size();
    double sum = 0.0;
    std::optional<double> last_eval;
    for (std::size_t i = 0; i < report.aligned_rows; ++i) {
      sum += r.rows[i].zero_adv_fraction;
      if (r.rows[i].eval_accuracy) last_eval = r.rows[i].eval_accuracy;
    }
    o["mean_zero_adv_fraction"] =
        report.aligned_rows ? sum / static_cast<double>(report.aligned_rows) : 0.0;
    o["final_eval_accuracy"] = last_eval ? nlohmann::ordered_json(*last_eval) : nlohmann::ordered_json(nullptr);
    if (report.aligned_rows) {
      const auto& last = r.rows[report.aligned_rows - 1];
      o["final_g"] = last.g;
      o["cumulative_ignored"] = last.cumulative_ignored;
    }
    runs.push_back(std::move(o));
  }
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

}  // namespace retcurr
