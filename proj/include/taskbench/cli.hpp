#pragma once

// Subcommand implementations behind tools/taskbench.cpp. Each returns a
// process exit code: 0 success, 2 usage/invalid input, 3 runtime failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "taskbench/analysis.hpp"
#include "taskbench/backends.hpp"
#include "taskbench/graph.hpp"
#include "taskbench/io/csv.hpp"
#include "taskbench/io/plan.hpp"
#include "taskbench/io/svg.hpp"
#include "taskbench/kernel.hpp"
#include "taskbench/sweep.hpp"

namespace taskbench::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kRuntime = 3 };

inline constexpr const char* kCoresEnv = "TASKBENCH_CORES";

/// TASKBENCH_CORES when set to a positive integer, else the hardware thread count.
inline std::uint32_t default_cores() {
  if (const char* env = std::getenv(kCoresEnv)) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 1'000'000) return static_cast<std::uint32_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

template <class Fn>
int guarded(Streams io, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidSpec& e) {
    fmt::print(io.err, "error: invalid spec: {}\n", e.what());
    return kUsage;
  } catch (const ConfigMismatch& e) {
    fmt::print(io.err, "error: config mismatch: {}\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    fmt::print(io.err, "error: {}\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    fmt::print(io.err, "error: {}\n", e.what());
    return kRuntime;
  }
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
  std::string out = "calibration.txt";
  std::uint32_t target_ms = 200;
  std::uint32_t samples = 5;
  std::string kernel = "compute_bound";
};

inline int cmd_calibrate(const CalibrateOptions& o, Streams io = {}) {
  return guarded(io, [&] {
    const auto kind = parse_kernel_kind(o.kernel);
    if (kind == KernelKind::empty) {
      fmt::print(io.err, "error: the empty kernel has nothing to calibrate\n");
      return int{kUsage};
    }
    const auto c = calibrate(kind, std::chrono::milliseconds(o.target_ms), o.samples);
    write_calibration_file(o.out, c);
    fmt::print(io.out, "ns_per_iteration {:.6g} (dispersion {:.3g}, {} samples, {} flops/iteration) -> {}\n",
               c.ns_per_iteration, c.dispersion, c.samples, c.flops_per_iteration, o.out);
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// run

struct RunOptionsCli {
  std::string backend = "serial";
  std::string pattern = "stencil_1d";
  std::optional<std::uint32_t> width;
  std::uint32_t steps = 1000;
  std::uint64_t grain = 4096;
  std::optional<std::uint32_t> cores;
  std::uint32_t shards_per_core = 1;
  std::uint64_t output_bytes = 16;
  std::string transport = "shared_queue";
  bool steal = true;
  std::string priority_mode = "none";
  bool idle_detection = false;
  std::string worker_stack = "default";
  std::string kernel = "compute_bound";
  std::uint32_t repetitions = 1;
  std::uint32_t warmup = 0;
  std::optional<std::string> calibration;
  std::optional<double> peak_flops;
  std::optional<std::string> csv;
};

inline BackendConfig backend_from(const RunOptionsCli& o) {
  BackendConfig c;
  c.kind = parse_backend(o.backend);
  c.cores = o.cores.value_or(default_cores());
  c.shards_per_core = o.shards_per_core;
  c.scheduler.work_stealing = o.steal;
  c.scheduler.priority_mode = parse_priority_mode(o.priority_mode);
  c.scheduler.idle_detection = o.idle_detection;
  c.scheduler.worker_stack = parse_worker_stack(o.worker_stack);
  c.transport.medium = parse_transport(o.transport);
  validate(c);
  if (c.kind == BackendKind::message_passing) {
    const auto w = o.width.value_or(c.default_width());
    if (w % c.cores != 0)
      throw ConfigMismatch(fmt::format("message_passing needs width ({}) divisible by ranks ({})", w, c.cores));
  }
  return c;
}

inline io::RowMeta meta_for(const GraphSpec& spec, const BackendConfig& c, const std::optional<Calibration>& cal,
                            std::uint32_t warmup, double peak) {
  io::RowMeta m;
  m.backend = std::string(to_string(c.kind));
  m.pattern = to_string(spec.pattern);
  m.cores = c.cores;
  m.shards_per_core = c.shards_per_core;
  m.width = spec.width;
  m.steps = spec.timesteps;
  m.output_bytes = spec.output_bytes;
  m.scheduler = knob_string(c);
  m.warmup_runs = warmup;
  m.peak_flops = peak;
  if (cal) {
    m.calibration_ns_per_iter = cal->ns_per_iteration;
    m.calibration_fingerprint = calibration_fingerprint(*cal);
  }
  return m;
}

inline int cmd_run(const RunOptionsCli& o, Streams io = {}) {
  return guarded(io, [&] {
    const BackendConfig cfg = backend_from(o);
    GraphSpec spec;
    spec.width = o.width.value_or(cfg.default_width());
    spec.timesteps = o.steps;
    spec.pattern = parse_pattern(o.pattern);
    spec.output_bytes = o.output_bytes;
    spec.kernel = {parse_kernel_kind(o.kernel), o.grain};
    const TaskGraph g = build_graph(spec);
    if (o.repetitions < 1) throw std::invalid_argument("--repetitions must be at least 1");

    std::optional<Calibration> cal;
    if (o.calibration) cal = read_calibration_file(*o.calibration);

    RunOptions ropts;
    if (cal) ropts.ns_per_iteration_hint = cal->ns_per_iteration;
    SweepRequest req{spec, cfg, {o.grain}, o.repetitions, o.warmup};
    const auto ms = measure_sweep(req, default_runner(ropts));

    // A single measurement cannot serve as its own peak, so the calibration
    // outranks it here.
    std::optional<double> cal_peak;
    if (cal) cal_peak = peak_flops(*cal, cfg.cores);
    const double measured = best_measured_flops(ms);
    const double peak = o.peak_flops ? *o.peak_flops : cal_peak ? *cal_peak : resolve_peak({}, measured, {});

    const io::CurveRow row{meta_for(spec, cfg, cal, o.warmup, peak), make_point(ms.front(), cfg.cores, peak)};
    const auto header = io::header_line(io::curve_columns());
    const auto line = io::format_curve_row(row);
    fmt::print(io.out, "{}\n{}\n", header, line);
    if (o.csv) io::append_row(*o.csv, header, line);
    fmt::print(io.err, "tasks {} edges {} checksum {:016x}\n", ms.front().tasks_executed,
               g.total_edges(), ms.front().dataflow_checksum);
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::string plan;
  std::optional<std::string> out_dir;
  std::optional<double> peak_flops;
  std::uint32_t calibration_target_ms = 200;
};

inline SweepRequest request_for(const io::Experiment& e) {
  SweepRequest r;
  r.base.width = e.effective_width();
  r.base.timesteps = e.steps;
  r.base.pattern = e.pattern;
  r.base.output_bytes = e.output_bytes;
  r.base.kernel.kind = e.kernel;
  r.backend = e.backend;
  r.grains = e.grains;
  r.repetitions = e.repetitions;
  r.warmup_runs = e.warmup_runs;
  return r;
}

inline std::string format_metg_table(const std::vector<io::MetgRow>& rows) {
  std::string s = fmt::format("{:<16} {:<20} {:>5} {:>4} {:>12}  {}\n", "backend", "pattern", "cores", "N",
                              "METG(us)", "state");
  for (const auto& r : rows)
    s += fmt::format("{:<16} {:<20} {:>5} {:>4} {:>12}  {}{}\n", r.meta.backend, r.meta.pattern, r.meta.cores,
                     r.meta.shards_per_core, r.result.finite() ? fmt::format("{:.3f}", r.result.metg_us) : "-",
                     to_string(r.result.state), r.result.non_monotone ? " (non-monotone)" : "");
  return s;
}

inline int cmd_sweep(const SweepOptions& o, Streams io = {}) {
  return guarded(io, [&]() -> int {
    auto plan = io::read_plan_file(o.plan);
    if (o.out_dir) plan.output_dir = *o.out_dir;
    if (o.peak_flops) plan.peak_flops = o.peak_flops;
    std::filesystem::create_directories(plan.output_dir);
    // Validate every experiment before measuring anything.
    for (const auto& e : plan.experiments) {
      build_graph(request_for(e).base);
      validate(e.backend);
      if (e.backend.kind == BackendKind::message_passing && e.effective_width() % e.backend.cores != 0)
        throw ConfigMismatch(fmt::format("experiment '{}': width not divisible by ranks", e.name));
    }

    Calibration cal;
    if (plan.calibration) {
      cal = read_calibration_file(plan.calibration->string());
    } else {
      fmt::print(io.err, "calibrating kernel inline...\n");
      cal = calibrate(KernelKind::compute_bound, std::chrono::milliseconds(o.calibration_target_ms));
      write_calibration_file((plan.output_dir / "calibration.txt").string(), cal);
    }
    RunOptions ropts;
    ropts.ns_per_iteration_hint = cal.ns_per_iteration;
    const auto runner = default_runner(ropts);

    const auto raw_path = (plan.output_dir / "raw_runs.csv").string();
    std::filesystem::remove(raw_path);
    const std::string raw_header = "experiment,backend,pattern,cores,shards_per_core,width,steps,grain_iterations,"
                                   "output_bytes,wall_seconds_mean,repetitions,flops_per_second,scheduler,checksum,flops_per_iteration";

    struct Done {
      SweepRequest req;
      std::vector<GrainMeasurement> ms;
    };
    std::vector<Done> done;
    int status = kOk;
    for (const auto& e : plan.experiments) {
      const auto req = request_for(e);
      fmt::print(io.err, "[{}] {} {} cores={} N={} width={} steps={}\n", e.name, to_string(e.backend.kind),
                 to_string(e.pattern), e.backend.cores, e.backend.shards_per_core, req.base.width, req.base.timesteps);
      auto sink = [&](const GrainMeasurement& m) {
        io::append_row(raw_path, raw_header,
                       fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{:016x},{}", e.name, to_string(e.backend.kind),
                                   to_string(e.pattern), e.backend.cores, e.backend.shards_per_core, req.base.width,
                                   req.base.timesteps, m.grain_iterations, req.base.output_bytes,
                                   io::fmt_real(m.mean_wall_seconds()), m.wall_seconds.size(),
                                   io::fmt_real(m.flops_per_second()), knob_string(e.backend), m.dataflow_checksum,
                                   kFlopsPerIteration));
      };
      try {
        done.push_back({req, measure_sweep(req, runner, sink)});
      } catch (const SweepError& err) {
        fmt::print(io.err, "error: experiment '{}': {}\n", e.name, err.what());
        if (!err.partial.empty()) done.push_back({req, err.partial});
        status = kRuntime;
        break;
      }
    }

    // One peak for the whole plan, scaled by each curve's core count.
    double best_per_core = 0.0;
    for (const auto& d : done)
      best_per_core = std::max(best_per_core, best_measured_flops(d.ms) / d.req.backend.cores);

    std::vector<io::CurveRow> rows;
    for (const auto& d : done) {
      const auto cores = d.req.backend.cores;
      const double peak = resolve_peak(plan.peak_flops, best_per_core * cores, peak_flops(cal, cores));
      const auto meta = meta_for(d.req.base, d.req.backend, cal, d.req.warmup_runs, peak);
      for (const auto& m : d.ms) rows.push_back({meta, make_point(m, cores, peak)});
    }
    const auto metg = io::metg_table(rows, plan.threshold);
    io::write_text_file((plan.output_dir / "curves.csv").string(), io::format_curves_csv(rows));
    io::write_text_file((plan.output_dir / "metg.csv").string(), io::format_metg_csv(metg));
    fmt::print(io.out, "{}", format_metg_table(metg));
    fmt::print(io.out, "wrote {} and {}\n", (plan.output_dir / "curves.csv").string(),
               (plan.output_dir / "metg.csv").string());
    return status;
  });
}

// ---------------------------------------------------------------------------
// metg

struct MetgOptions {
  std::string curves;
  std::optional<std::string> out;
  double threshold = 0.5;
};

inline int cmd_metg(const MetgOptions& o, Streams io = {}) {
  return guarded(io, [&] {
    const auto rows = io::read_curves_file(o.curves);
    const auto text = io::format_metg_csv(io::metg_table(rows, o.threshold));
    if (o.out) io::write_text_file(*o.out, text);
    else fmt::print(io.out, "{}", text);
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// variants

struct VariantsOptions {
  std::optional<std::uint32_t> cores;
  std::string pattern = "stencil_1d";
  std::optional<std::uint32_t> width;
  std::uint32_t shards_per_core = 1;
  std::uint32_t steps = 100;
  std::uint64_t grain = 4096;
  std::uint32_t repetitions = 5;
  std::uint64_t output_bytes = 16;
  std::optional<std::string> csv;
};

struct Variant {
  std::string name;
  BackendConfig config;
  std::string baseline;  // variant its throughput is compared with
};

/// The scheduler/transport variants compared at a fixed grain.
inline std::vector<Variant> variant_set(std::uint32_t cores, std::uint32_t shards_per_core) {
  BackendConfig base;
  base.kind = BackendKind::async_ws;
  base.cores = cores;
  base.shards_per_core = shards_per_core;
  base.scheduler = {true, PriorityMode::bitvector, true, WorkerStack::normal};

  auto fixed64 = base;
  fixed64.scheduler.priority_mode = PriorityMode::fixed64;
  auto no_idle = base;
  no_idle.scheduler.priority_mode = PriorityMode::none;
  no_idle.scheduler.idle_detection = false;
  auto mp_socket = base;
  mp_socket.kind = BackendKind::message_passing;
  mp_socket.transport.medium = TransportMedium::local_socket;
  auto mp_shared = mp_socket;
  mp_shared.transport.medium = TransportMedium::shared_queue;
  auto combined = base;
  combined.scheduler.priority_mode = PriorityMode::fixed64;
  combined.scheduler.idle_detection = false;

  return {{"default", base, "default"},
          {"fixed64_priority", fixed64, "default"},
          {"no_idle_detection", no_idle, "default"},
          {"message_passing_socket", mp_socket, "message_passing_socket"},
          {"shared_queue_transport", mp_shared, "message_passing_socket"},
          {"combined", combined, "default"}};
}

struct VariantRow {
  std::string name;
  std::string baseline;
  BackendConfig config;
  std::vector<double> throughput;  // tasks per second, one per repetition
  ConfidenceInterval ci;
  double relative = 1.0;
  double relative_ci99 = 0.0;
  std::uint64_t checksum = 0;
};

inline std::vector<VariantRow> measure_variants(const GraphSpec& spec, const std::vector<Variant>& variants,
                                                std::uint32_t repetitions, const Runner& runner) {
  if (repetitions < 2) throw std::invalid_argument("variants need at least 2 repetitions for a 99% CI");
  const TaskGraph g = build_graph(spec);
  std::vector<VariantRow> rows;
  for (const auto& v : variants) {
    VariantRow row{v.name, v.baseline, v.config, {}, {}, 1.0, 0.0, 0};
    runner(g, v.config);  // warm-up
    for (std::uint32_t r = 0; r < repetitions; ++r) {
      const auto res = runner(g, v.config);
      if (r > 0 && res.dataflow_checksum != row.checksum)
        throw BackendError(fmt::format("variant '{}' changed its checksum between repetitions", v.name));
      row.checksum = res.dataflow_checksum;
      row.throughput.push_back(static_cast<double>(res.tasks_executed) / res.wall_seconds);
    }
    row.ci = confidence_interval(row.throughput, 0.99);
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    const auto it = std::find_if(rows.begin(), rows.end(), [&](auto& b) { return b.name == row.baseline; });
    row.relative = row.ci.mean / it->ci.mean;
    row.relative_ci99 = row.ci.half_width / it->ci.mean;
  }
  return rows;
}

inline int cmd_variants(const VariantsOptions& o, Streams io = {}) {
  return guarded(io, [&]() -> int {
    const std::uint32_t cores = o.cores.value_or(default_cores());
    GraphSpec spec;
    spec.width = o.width.value_or(cores * o.shards_per_core);
    spec.timesteps = o.steps;
    spec.pattern = parse_pattern(o.pattern);
    spec.output_bytes = o.output_bytes;
    spec.kernel = {KernelKind::compute_bound, o.grain};
    if (spec.width % cores != 0)
      throw ConfigMismatch(fmt::format("width {} must be divisible by {} ranks", spec.width, cores));

    const auto rows = measure_variants(spec, variant_set(cores, o.shards_per_core), o.repetitions, default_runner());

    const std::string header =
        "variant,backend,scheduler,baseline,pattern,width,steps,grain_iterations,repetitions,"
        "tasks_per_second_mean,tasks_per_second_ci99,relative_throughput,relative_ci99,checksum,tool_version,flops_per_iteration";
    std::string csv = header + "\n";
    fmt::print(io.out, "{:<24} {:<16} {:>14} {:>12} {:>10} {:>10}  {}\n", "variant", "backend", "tasks/s", "+-ci99",
               "relative", "+-ci99", "vs");
    bool consistent = true;
    for (const auto& r : rows) {
      consistent = consistent && r.checksum == rows.front().checksum;
      fmt::print(io.out, "{:<24} {:<16} {:>14.1f} {:>12.1f} {:>10.4f} {:>10.4f}  {}\n", r.name,
                 to_string(r.config.kind), r.ci.mean, r.ci.half_width, r.relative, r.relative_ci99, r.baseline);
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{:016x},{},{}\n", r.name, to_string(r.config.kind),
                         knob_string(r.config), r.baseline, to_string(spec.pattern), spec.width, spec.timesteps,
                         spec.kernel.iterations, o.repetitions, io::fmt_real(r.ci.mean), io::fmt_real(r.ci.half_width),
                         io::fmt_real(r.relative), io::fmt_real(r.relative_ci99), r.checksum, io::kToolVersion,
                         kFlopsPerIteration);
    }
    if (o.csv) io::write_text_file(*o.csv, csv);
    if (!consistent) {
      fmt::print(io.err, "error: dataflow checksum differs across variants\n");
      return kRuntime;
    }
    fmt::print(io.out, "checksum {:016x} identical across all variants\n", rows.front().checksum);
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// plot

struct PlotOptions {
  std::string input;
  std::string out_dir = ".";
  double threshold = 0.5;
};

inline int cmd_plot(const PlotOptions& o, Streams io = {}) {
  return guarded(io, [&] {
    std::ifstream in(o.input);
    if (!in) throw io::CsvError(fmt::format("cannot open '{}'", o.input));
    std::string header;
    std::getline(in, header);
    in.seekg(0);
    std::filesystem::create_directories(o.out_dir);
    const std::filesystem::path dir(o.out_dir);
    const auto stem = std::filesystem::path(o.input).stem().string();
    if (header.find("grain_iterations") != std::string::npos) {
      const auto rows = io::read_curves(in);
      io::write_text_file((dir / (stem + "_efficiency.svg")).string(), io::plot_efficiency(rows, o.threshold));
      io::write_text_file((dir / (stem + "_flops.svg")).string(), io::plot_flops(rows));
      fmt::print(io.out, "wrote {} and {}\n", (dir / (stem + "_efficiency.svg")).string(),
                 (dir / (stem + "_flops.svg")).string());
    } else if (header.find("metg_us") != std::string::npos) {
      const auto rows = io::read_metg(in);
      io::write_text_file((dir / (stem + "_metg.svg")).string(), io::plot_metg(rows));
      fmt::print(io.out, "wrote {}\n", (dir / (stem + "_metg.svg")).string());
    } else {
      throw std::invalid_argument(fmt::format("'{}' is neither a curves nor a metg CSV", o.input));
    }
    return int{kOk};
  });
}

}  // namespace taskbench::cli
