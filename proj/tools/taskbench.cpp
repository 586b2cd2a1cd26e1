// taskbench: run task-graph benchmarks and derive efficiency/METG tables.

#include <iostream>

#include "CLI11.hpp"
#include "taskbench/cli.hpp"

using namespace taskbench;

int main(int argc, char** argv) {
  CLI::App app{"Task-graph runtime overhead benchmark"};
  app.set_version_flag("--version", std::string(io::kToolVersion));
  app.require_subcommand(1);

  cli::CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "Measure ns per kernel iteration and write a calibration file");
  calibrate->add_option("-o,--out", cal.out, "Calibration file to write")->capture_default_str();
  calibrate->add_option("--target-ms", cal.target_ms, "Minimum duration of each timed sample")
      ->check(CLI::Range(1u, 600'000u))
      ->capture_default_str();
  calibrate->add_option("--samples", cal.samples, "Timed samples (median is reported)")
      ->check(CLI::Range(5u, 1000u))
      ->capture_default_str();
  calibrate->add_option("--kernel", cal.kernel, "compute_bound | empty")->capture_default_str();

  cli::RunOptionsCli run;
  auto* runc = app.add_subcommand("run", "Execute one graph and print one CSV row");
  runc->add_option("--backend", run.backend, "serial | fork_join | async_ws | message_passing")->capture_default_str();
  runc->add_option("--pattern", run.pattern,
                   "trivial | no_comm | stencil_1d | stencil_1d_periodic | fft | tree | nearest:R | all_to_all")
      ->capture_default_str();
  runc->add_option("--width", run.width, "Tasks per timestep (default cores x shards-per-core)");
  runc->add_option("--steps", run.steps, "Timesteps")->capture_default_str();
  runc->add_option("--grain", run.grain, "Kernel iterations per task")->capture_default_str();
  runc->add_option("--cores", run.cores, "Workers/ranks (default $TASKBENCH_CORES or hardware threads)");
  runc->add_option("--shards-per-core", run.shards_per_core, "Overdecomposition factor")->capture_default_str();
  runc->add_option("--output-bytes", run.output_bytes, "Payload bytes per dependence edge")->capture_default_str();
  runc->add_option("--transport", run.transport, "shared_queue | local_socket")->capture_default_str();
  runc->add_flag("--steal,!--no-steal", run.steal, "Idle workers steal queued tasks (async_ws)");
  runc->add_option("--priority-mode", run.priority_mode, "none | fixed64 | bitvector")->capture_default_str();
  runc->add_flag("--idle-detection,!--no-idle-detection", run.idle_detection, "Poll for quiescence each scheduler pass");
  runc->add_option("--worker-stack", run.worker_stack, "small | default")->capture_default_str();
  runc->add_option("--kernel", run.kernel, "compute_bound | empty")->capture_default_str();
  runc->add_option("--repetitions", run.repetitions, "Timed runs averaged into the row")->capture_default_str();
  runc->add_option("--warmup", run.warmup, "Untimed runs before measuring")->capture_default_str();
  runc->add_option("--calibration", run.calibration, "Calibration file (peak reference)");
  runc->add_option("--peak-flops", run.peak_flops, "Peak FLOP/s override for efficiency");
  runc->add_option("--csv", run.csv, "Append the row to this CSV file");

  cli::SweepOptions sweep;
  auto* sweepc = app.add_subcommand("sweep", "Run a plan file; write curves.csv and metg.csv");
  sweepc->add_option("plan", sweep.plan, "Plan file (JSON)")->required()->check(CLI::ExistingFile);
  sweepc->add_option("--out-dir", sweep.out_dir, "Override the plan's output directory");
  sweepc->add_option("--peak-flops", sweep.peak_flops, "Peak FLOP/s override");
  sweepc->add_option("--calibration-target-ms", sweep.calibration_target_ms, "Inline calibration sample length")
      ->capture_default_str();

  cli::MetgOptions metg;
  auto* metgc = app.add_subcommand("metg", "Recompute METG from a curves CSV");
  metgc->add_option("curves", metg.curves, "curves.csv")->required()->check(CLI::ExistingFile);
  metgc->add_option("-o,--out", metg.out, "Write metg CSV here instead of stdout");
  metgc->add_option("--threshold", metg.threshold, "Efficiency threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();

  cli::VariantsOptions var;
  auto* varc = app.add_subcommand("variants", "Compare scheduler/transport variants at a fixed grain");
  varc->add_option("--cores", var.cores, "Workers/ranks (default $TASKBENCH_CORES or hardware threads)");
  varc->add_option("--pattern", var.pattern, "Dependence pattern")->capture_default_str();
  varc->add_option("--width", var.width, "Tasks per timestep");
  varc->add_option("--shards-per-core", var.shards_per_core, "Overdecomposition factor")->capture_default_str();
  varc->add_option("--steps", var.steps, "Timesteps")->capture_default_str();
  varc->add_option("--grain", var.grain, "Kernel iterations per task")->capture_default_str();
  varc->add_option("--repetitions", var.repetitions, "Timed runs per variant")->capture_default_str();
  varc->add_option("--output-bytes", var.output_bytes, "Payload bytes per edge")->capture_default_str();
  varc->add_option("--csv", var.csv, "Write the table as CSV");

  cli::PlotOptions plot;
  auto* plotc = app.add_subcommand("plot", "Render SVG charts from curves.csv or metg.csv");
  plotc->add_option("input", plot.input, "curves.csv or metg.csv")->required()->check(CLI::ExistingFile);
  plotc->add_option("--out-dir", plot.out_dir, "Directory for SVG files")->capture_default_str();
  plotc->add_option("--threshold", plot.threshold, "Reference efficiency line")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  if (*calibrate) return cli::cmd_calibrate(cal);
  if (*runc) return cli::cmd_run(run);
  if (*sweepc) return cli::cmd_sweep(sweep);
  if (*metgc) return cli::cmd_metg(metg);
  if (*varc) return cli::cmd_variants(var);
  if (*plotc) return cli::cmd_plot(plot);
  return cli::kUsage;
}
