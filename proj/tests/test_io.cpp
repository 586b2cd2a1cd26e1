#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "taskbench/cli.hpp"
#include "taskbench/io/csv.hpp"
#include "taskbench/io/plan.hpp"
#include "taskbench/io/svg.hpp"

using namespace taskbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("taskbench_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

io::CurveRow sample_row(std::uint64_t grain, double eff) {
  io::CurveRow r;
  r.meta.backend = "async_ws";
  r.meta.pattern = "stencil_1d";
  r.meta.cores = 4;
  r.meta.width = 4;
  r.meta.steps = 100;
  r.meta.output_bytes = 16;
  r.meta.scheduler = "steal=1;priority=none;idle=0;stack=default;transport=shared_queue";
  r.meta.peak_flops = 1.0 / 3.0 * 1e10;
  r.point.grain_iterations = grain;
  r.point.granularity_us = 0.1 + static_cast<double>(grain) / 7.0;
  r.point.efficiency = eff;
  r.point.wall_seconds_mean = 1e-3 * static_cast<double>(grain) / 3.0;
  r.point.wall_seconds_ci99 = 1e-17;
  r.point.repetitions = 5;
  r.point.flops = static_cast<double>(grain) * 32 * 400;
  r.point.flops_per_second = r.point.flops / r.point.wall_seconds_mean;
  return r;
}

const char* kPlan = R"({
  "name": "tiny",
  "output_dir": "out",
  "peak_flops": 5e9,
  "experiments": [
    {"name": "fj", "backend": "fork_join", "cores": 2, "steps": 5, "grains": [16, 64, 256, 1024], "repetitions": 2},
    {"name": "mp", "backend": "message_passing", "cores": 2, "shards_per_core": 2, "steps": 5,
     "grains": [16, 256], "repetitions": 2, "transport": "local_socket"}
  ]
})";

}  // namespace

TEST(Csv, CurveColumnsStartWithTheFixedSchema) {
  const std::vector<std::string> head{
      "backend", "pattern", "cores", "shards_per_core", "width", "steps", "grain_iterations",
      "output_bytes", "wall_seconds_mean", "wall_seconds_ci99", "flops", "flops_per_second",
      "efficiency", "granularity_us", "repetitions", "calibration_ns_per_iter"};
  const auto& cols = io::curve_columns();
  ASSERT_GE(cols.size(), head.size());
  EXPECT_TRUE(std::equal(head.begin(), head.end(), cols.begin()));
}

TEST(Csv, CurveRowsRoundTripBitIdentically) {
  std::vector<io::CurveRow> rows;
  for (std::uint64_t g : {16, 32, 64, 128}) rows.push_back(sample_row(g, 0.1 * std::log2(g) - 0.05));
  const auto text = io::format_curves_csv(rows);
  std::istringstream in(text);
  const auto back = io::read_curves(in);
  EXPECT_EQ(back, rows);
  EXPECT_EQ(io::format_curves_csv(back), text);
}

TEST(Csv, MetgTableGroupsCurvesInOrder) {
  std::vector<io::CurveRow> rows;
  for (std::uint64_t g : {16, 32, 64}) rows.push_back(sample_row(g, g / 100.0));
  for (std::uint64_t g : {16, 32, 64}) {
    auto r = sample_row(g, 0.9);
    r.meta.backend = "fork_join";
    rows.push_back(r);
  }
  const auto table = io::metg_table(rows);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].meta.backend, "async_ws");
  EXPECT_EQ(table[0].result.state, MetgState::value);
  EXPECT_EQ(table[1].result.state, MetgState::saturated);
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream missing("backend,pattern\nx,y\n");
  EXPECT_THROW(io::read_curves(missing), io::CsvError);
  auto text = io::format_curves_csv({sample_row(16, 0.5)});
  text.replace(text.find(",16,"), 4, ",1x,");
  std::istringstream bad(text);
  EXPECT_THROW(io::read_curves(bad), io::CsvError);
}

TEST(Plan, ParsesDefaultsAndOverrides) {
  const auto p = io::parse_plan(kPlan, "/tmp/base");
  EXPECT_EQ(p.name, "tiny");
  EXPECT_EQ(p.output_dir, fs::path("/tmp/base/out"));
  EXPECT_EQ(p.peak_flops, 5e9);
  EXPECT_EQ(p.threshold, 0.5);
  ASSERT_EQ(p.experiments.size(), 2u);
  EXPECT_EQ(p.experiments[0].effective_width(), 2u);
  EXPECT_EQ(p.experiments[1].effective_width(), 4u);
  EXPECT_EQ(p.experiments[1].backend.transport.medium, TransportMedium::local_socket);
  EXPECT_EQ(p.experiments[0].warmup_runs, 1u);
}

TEST(Plan, RejectsBadPlans) {
  EXPECT_THROW(io::parse_plan("{"), io::PlanError);
  EXPECT_THROW(io::parse_plan(R"({"name":"x","experiments":[]})"), io::PlanError);
  EXPECT_THROW(io::parse_plan(R"({"name":"x","experiments":[{"name":"a","backend":"serial"},
                                                           {"name":"a","backend":"serial"}]})"),
               io::PlanError);
  EXPECT_THROW(io::parse_plan(R"({"name":"x","experiments":[{"name":"a","backend":"bogus"}]})"), io::PlanError);
  EXPECT_THROW(io::parse_plan(R"({"name":"x","experiments":[{"name":"a","backend":"serial","pattern":"fft2"}]})"),
               io::PlanError);
  EXPECT_THROW(io::parse_plan(R"({"name":"x","calibration":"nope.txt","experiments":[{"name":"a","backend":"serial"}]})",
                              "/nonexistent"),
               io::PlanError);
}

TEST(Sweep, CsvFilesRoundTripThroughMetgTable) {
  const auto dir = scratch_dir("sweep");
  {
    std::ofstream(dir / "plan.json") << kPlan;
  }
  std::ostringstream out, err;
  cli::SweepOptions o;
  o.plan = (dir / "plan.json").string();
  ASSERT_EQ(cli::cmd_sweep(o, {out, err}), 0) << err.str();

  const auto curves_text = slurp(dir / "out" / "curves.csv");
  const auto metg_text = slurp(dir / "out" / "metg.csv");
  const auto rows = io::read_curves_file((dir / "out" / "curves.csv").string());
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_EQ(io::format_curves_csv(rows), curves_text);
  EXPECT_EQ(io::format_metg_csv(io::metg_table(rows)), metg_text);
  EXPECT_TRUE(fs::exists(dir / "out" / "raw_runs.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "calibration.txt"));

  std::ostringstream mout;
  cli::MetgOptions m;
  m.curves = (dir / "out" / "curves.csv").string();
  ASSERT_EQ(cli::cmd_metg(m, {mout, err}), 0);
  EXPECT_EQ(mout.str(), metg_text);
}

TEST(Plot, WritesSvgCharts) {
  const auto dir = scratch_dir("plot");
  std::vector<io::CurveRow> rows;
  for (std::uint64_t g : {16, 64, 256}) rows.push_back(sample_row(g, g / 300.0));
  io::write_text_file((dir / "curves.csv").string(), io::format_curves_csv(rows));
  io::write_text_file((dir / "metg.csv").string(), io::format_metg_csv(io::metg_table(rows)));
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_plot({(dir / "curves.csv").string(), dir.string()}, {out, err}), 0) << err.str();
  EXPECT_EQ(cli::cmd_plot({(dir / "metg.csv").string(), dir.string()}, {out, err}), 0) << err.str();
  const auto svg = slurp(dir / "curves_efficiency.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "curves_flops.svg"));
  EXPECT_TRUE(fs::exists(dir / "metg_metg.svg"));
}

TEST(Cli, ExitCodes) {
  std::ostringstream out, err;
  cli::RunOptionsCli ok;
  ok.backend = "fork_join";
  ok.cores = 2;
  ok.steps = 4;
  ok.grain = 16;
  ok.peak_flops = 1e9;
  EXPECT_EQ(cli::cmd_run(ok, {out, err}), 0) << err.str();

  auto bad_pattern = ok;
  bad_pattern.pattern = "fft";
  bad_pattern.width = 6;
  EXPECT_EQ(cli::cmd_run(bad_pattern, {out, err}), 2);

  auto indivisible = ok;
  indivisible.backend = "message_passing";
  indivisible.width = 5;
  EXPECT_EQ(cli::cmd_run(indivisible, {out, err}), 2);

  auto unknown = ok;
  unknown.backend = "mpi";
  EXPECT_EQ(cli::cmd_run(unknown, {out, err}), 2);

  cli::MetgOptions missing;
  missing.curves = "/nonexistent/curves.csv";
  EXPECT_EQ(cli::cmd_metg(missing, {out, err}), 3);
}

TEST(Cli, VariantsReportIdenticalChecksums) {
  std::ostringstream out, err;
  cli::VariantsOptions o;
  o.cores = 2;
  o.steps = 10;
  o.grain = 64;
  o.repetitions = 2;
  EXPECT_EQ(cli::cmd_variants(o, {out, err}), 0) << err.str();
  EXPECT_NE(out.str().find("identical across all variants"), std::string::npos);
  for (const auto& v : cli::variant_set(2, 1)) EXPECT_NE(out.str().find(v.name), std::string::npos);
}

TEST(Cli, CoresFromEnvironment) {
  ::setenv(cli::kCoresEnv, "3", 1);
  EXPECT_EQ(cli::default_cores(), 3u);
  ::setenv(cli::kCoresEnv, "zero", 1);
  EXPECT_GE(cli::default_cores(), 1u);
  ::unsetenv(cli::kCoresEnv);
}
