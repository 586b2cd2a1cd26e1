#pragma once

// Experiment plan files (JSON). The README documents the fields.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "taskbench/backends/config.hpp"
#include "taskbench/graph.hpp"

namespace taskbench::io {

class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Powers of two from 2^4 to 2^20.
inline std::vector<std::uint64_t> default_grain_ladder() {
  std::vector<std::uint64_t> g;
  for (int e = 4; e <= 20; ++e) g.push_back(std::uint64_t{1} << e);
  return g;
}

struct Experiment {
  std::string name;
  PatternKind pattern = PatternKind::stencil_1d();
  BackendConfig backend;
  std::optional<std::uint32_t> width;  // defaults to cores * shards_per_core
  std::uint32_t steps = 1000;
  std::vector<std::uint64_t> grains = default_grain_ladder();
  std::uint32_t repetitions = 5;
  std::uint32_t warmup_runs = 1;
  std::uint64_t output_bytes = 16;
  KernelKind kernel = KernelKind::compute_bound;

  std::uint32_t effective_width() const { return width.value_or(backend.default_width()); }
};

struct ExperimentPlan {
  std::string name;
  std::filesystem::path output_dir = "results";
  std::optional<std::filesystem::path> calibration;  // absent: calibrate inline
  std::optional<double> peak_flops;
  double threshold = 0.5;
  std::vector<Experiment> experiments;
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline Experiment parse_experiment(const nlohmann::json& j) {
  Experiment e;
  e.name = j.at("name").get<std::string>();
  e.pattern = parse_pattern(get_or<std::string>(j, "pattern", "stencil_1d"));
  e.backend.kind = parse_backend(j.at("backend").get<std::string>());
  e.backend.cores = get_or<std::uint32_t>(j, "cores", 1);
  e.backend.shards_per_core = get_or<std::uint32_t>(j, "shards_per_core", 1);
  if (j.contains("width")) e.width = j.at("width").get<std::uint32_t>();
  e.steps = get_or<std::uint32_t>(j, "steps", e.steps);
  if (j.contains("grains")) e.grains = j.at("grains").get<std::vector<std::uint64_t>>();
  e.repetitions = get_or<std::uint32_t>(j, "repetitions", e.repetitions);
  e.warmup_runs = get_or<std::uint32_t>(j, "warmup_runs", e.warmup_runs);
  e.output_bytes = get_or<std::uint64_t>(j, "output_bytes", e.output_bytes);
  e.kernel = parse_kernel_kind(get_or<std::string>(j, "kernel", "compute_bound"));
  if (j.contains("scheduler")) {
    const auto& s = j.at("scheduler");
    e.backend.scheduler.work_stealing = get_or<bool>(s, "work_stealing", true);
    e.backend.scheduler.priority_mode = parse_priority_mode(get_or<std::string>(s, "priority_mode", "none"));
    e.backend.scheduler.idle_detection = get_or<bool>(s, "idle_detection", false);
    e.backend.scheduler.worker_stack = parse_worker_stack(get_or<std::string>(s, "worker_stack", "default"));
  }
  e.backend.transport.medium = parse_transport(get_or<std::string>(j, "transport", "shared_queue"));

  if (e.backend.cores == 0 || e.backend.shards_per_core == 0)
    throw PlanError(fmt::format("experiment '{}': cores and shards_per_core must be positive", e.name));
  if (e.grains.empty()) throw PlanError(fmt::format("experiment '{}': empty grain list", e.name));
  if (e.repetitions < 1) throw PlanError(fmt::format("experiment '{}': repetitions must be >= 1", e.name));
  return e;
}

}  // namespace detail

/// Relative paths (output_dir, calibration) resolve against `base_dir`.
inline ExperimentPlan parse_plan(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(fmt::format("plan is not valid JSON: {}", e.what()));
  }
  ExperimentPlan p;
  try {
    p.name = j.at("name").get<std::string>();
    if (j.contains("output_dir")) p.output_dir = base_dir / j.at("output_dir").get<std::string>();
    else p.output_dir = base_dir / "results";
    if (j.contains("calibration")) p.calibration = base_dir / j.at("calibration").get<std::string>();
    if (j.contains("peak_flops")) p.peak_flops = j.at("peak_flops").get<double>();
    p.threshold = detail::get_or<double>(j, "threshold", 0.5);
    for (const auto& e : j.at("experiments")) p.experiments.push_back(detail::parse_experiment(e));
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(fmt::format("bad plan: {}", e.what()));
  } catch (const InvalidSpec& e) {
    throw PlanError(fmt::format("bad plan: {}", e.what()));
  } catch (const PlanError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw PlanError(fmt::format("bad plan: {}", e.what()));
  }
  if (p.experiments.empty()) throw PlanError("plan has no experiments");
  std::set<std::string> names;
  for (const auto& e : p.experiments)
    if (!names.insert(e.name).second) throw PlanError(fmt::format("duplicate experiment name '{}'", e.name));
  if (p.calibration && !std::filesystem::exists(*p.calibration))
    throw PlanError(fmt::format("calibration file '{}' does not exist", p.calibration->string()));
  return p;
}

inline ExperimentPlan read_plan_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PlanError(fmt::format("cannot open plan '{}'", path.string()));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_plan(text, path.parent_path());
}

}  // namespace taskbench::io
