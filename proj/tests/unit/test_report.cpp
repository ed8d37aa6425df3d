#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "retcurr/corpus.hpp"
#include "retcurr/error.hpp"
#include "retcurr/report.hpp"

using namespace retcurr;
namespace fs = std::filesystem;

namespace {

constexpr const char* kHeader =
    "iteration,g,window_mean,zero_adv_fraction,cumulative_ignored,upgraded,eval_accuracy\n";

RunMetrics run(std::string name, std::vector<double> zero_adv) {
  RunMetrics r{std::move(name), {}};
  long long cum = 0;
  for (std::size_t i = 0; i < zero_adv.size(); ++i) {
    cum += static_cast<long long>(zero_adv[i] * 4);
    r.rows.push_back({static_cast<int>(i + 1), 1, 0.5, zero_adv[i], cum, false,
                      i + 1 == zero_adv.size() ? std::optional<double>(0.25) : std::nullopt});
  }
  return r;
}

}  // namespace

TEST_CASE("metrics csv parsing") {
  const std::string csv = std::string(kHeader) +
                          "1,2,,0.250000,1,0,\n"
                          "2,3,0.600000,0.500000,3,1,0.750000\n";
  const auto rows = parse_metrics_csv(csv);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].window_mean.has_value());
  CHECK_FALSE(rows[0].eval_accuracy.has_value());
  CHECK(rows[1].g == 3);
  CHECK(*rows[1].window_mean == 0.6);
  CHECK(rows[1].upgraded);
  CHECK(rows[1].cumulative_ignored == 3);
  CHECK(*rows[1].eval_accuracy == 0.75);
  CHECK_THROWS_AS(parse_metrics_csv("iteration,g\n1,2\n"), Error);
  CHECK_THROWS_AS(parse_metrics_csv(std::string(kHeader) + "1,2,,x,1,0,\n"), Error);
  CHECK_THROWS_AS(parse_metrics_csv(std::string(kHeader) + "1,2,,0.1\n"), Error);
}

TEST_CASE("single run report mirrors its metrics") {
  const auto rep = build_report({run("a", {0.5, 0.25, 0.0})});
  CHECK(rep.aligned_rows == 3);
  CHECK(rep.warnings.empty());
  CHECK(report_csv(rep) ==
        "iteration,zero_adv_fraction,eval_accuracy,g\n"
        "1,0.500000,,1\n"
        "2,0.250000,,1\n"
        "3,0.000000,0.250000,1\n");
  const auto summary = nlohmann::json::parse(report_summary_json(rep));
  const auto& r = summary["runs"][0];
  CHECK(r["name"] == "a");
  CHECK(r["mean_zero_adv_fraction"].get<double>() == doctest::Approx(0.25));
  CHECK(r["final_eval_accuracy"].get<double>() == 0.25);
  CHECK(r["cumulative_ignored"] == 3);
}

TEST_CASE("comparison suffixes columns and aligns on the shorter run") {
  const auto rep = build_report({run("x", {1.0, 0.5, 0.5, 0.0}), run("x", {0.25, 0.75})});
  CHECK(rep.runs[1].name == "x_2");
  CHECK(rep.aligned_rows == 2);
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find("x") != std::string::npos);
  const auto csv = report_csv(rep);
  CHECK(csv.rfind("iteration,zero_adv_fraction_x,eval_accuracy_x,g_x,"
                  "zero_adv_fraction_x_2,eval_accuracy_x_2,g_x_2\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  // Means are over the aligned prefix only.
  const auto summary = nlohmann::json::parse(report_summary_json(rep));
  CHECK(summary["aligned_iterations"] == 2);
  CHECK(summary["runs"][0]["mean_zero_adv_fraction"].get<double>() == doctest::Approx(0.75));
  CHECK(summary["runs"][1]["mean_zero_adv_fraction"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("misaligned iteration numbers are rejected") {
  auto b = run("b", {0.1, 0.2});
  b.rows[1].iteration = 5;
  CHECK_THROWS_AS(build_report({run("a", {0.1, 0.2}), b}), Error);
  CHECK_THROWS_AS(build_report({}), Error);
}

TEST_CASE("load_run reads a run directory") {
  const auto dir = fs::temp_directory_path() / "retcurr_test_report" / "wiki";
  fs::remove_all(dir.parent_path());
  fs::create_directories(dir);
  write_file(dir / "metrics.csv", std::string(kHeader) + "1,1,0.5,0.25,1,0,\n");
  try {
    load_run(dir);
    FAIL("expected missing run.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  write_file(dir / "run.json", "{}");
  const auto r = load_run(dir);
  CHECK(r.name == "wiki");
  CHECK(r.rows.size() == 1);
  write_file(dir / "run.json", "[1]");
  CHECK_THROWS_AS(load_run(dir), Error);
  fs::remove_all(dir.parent_path());
}
