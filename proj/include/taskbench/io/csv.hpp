#pragma once

// curves.csv / metg.csv. Reals are written with 17 significant digits so a
// read-back reproduces every value exactly.

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "taskbench/analysis.hpp"

#ifndef TASKBENCH_VERSION
#define TASKBENCH_VERSION "0.0.0"
#endif

namespace taskbench::io {

inline constexpr std::string_view kToolVersion = TASKBENCH_VERSION;

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a row carries besides the per-grain measurements.
struct RowMeta {
  std::string backend;
  std::string pattern;
  std::uint32_t cores = 1;
  std::uint32_t shards_per_core = 1;
  std::uint32_t width = 1;
  std::uint32_t steps = 1;
  std::uint64_t output_bytes = 0;
  double calibration_ns_per_iter = 0.0;  // 0 when no calibration was used
  std::string scheduler;                 // knob_string()
  std::string tool_version{kToolVersion};
  std::string calibration_fingerprint = "none";
  std::uint32_t warmup_runs = 1;
  double peak_flops = 0.0;
  std::uint32_t flops_per_iteration = kFlopsPerIteration;

  friend bool operator==(const RowMeta&, const RowMeta&) = default;
};

struct CurveRow {
  RowMeta meta;
  CurvePoint point;
  friend bool operator==(const CurveRow&, const CurveRow&) = default;
};

struct MetgRow {
  RowMeta meta;
  std::uint32_t repetitions = 0;
  std::size_t points = 0;
  MetgResult result;
};

inline const std::vector<std::string>& curve_columns() {
  static const std::vector<std::string> cols{
      "backend", "pattern", "cores", "shards_per_core", "width", "steps", "grain_iterations",
      "output_bytes", "wall_seconds_mean", "wall_seconds_ci99", "flops", "flops_per_second",
      "efficiency", "granularity_us", "repetitions", "calibration_ns_per_iter",
      // run metadata
      "scheduler", "tool_version", "calibration_fingerprint", "warmup_runs", "peak_flops",
      "flops_per_iteration"};
  return cols;
}

inline const std::vector<std::string>& metg_columns() {
  static const std::vector<std::string> cols{
      "backend", "pattern", "cores", "shards_per_core", "width", "steps", "output_bytes",
      "repetitions", "threshold", "state", "metg_us", "below_granularity_us",
      "above_granularity_us", "non_monotone", "points", "calibration_ns_per_iter", "scheduler",
      "tool_version", "calibration_fingerprint", "warmup_runs", "peak_flops", "flops_per_iteration"};
  return cols;
}

inline std::string fmt_real(double v) { return fmt::format("{:.17g}", v); }

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out += ',';
    out += fields[k];
  }
  return out;
}

inline std::string header_line(const std::vector<std::string>& cols) { return join(cols); }

inline std::string format_curve_row(const CurveRow& r) {
  const auto& m = r.meta;
  const auto& p = r.point;
  return join({m.backend, m.pattern, std::to_string(m.cores), std::to_string(m.shards_per_core),
               std::to_string(m.width), std::to_string(m.steps), std::to_string(p.grain_iterations),
               std::to_string(m.output_bytes), fmt_real(p.wall_seconds_mean), fmt_real(p.wall_seconds_ci99),
               fmt_real(p.flops), fmt_real(p.flops_per_second), fmt_real(p.efficiency),
               fmt_real(p.granularity_us), std::to_string(p.repetitions), fmt_real(m.calibration_ns_per_iter),
               m.scheduler, m.tool_version, m.calibration_fingerprint, std::to_string(m.warmup_runs),
               fmt_real(m.peak_flops), std::to_string(m.flops_per_iteration)});
}

inline std::string format_metg_row(const MetgRow& r) {
  const auto& m = r.meta;
  const auto& res = r.result;
  const auto opt_gran = [](const std::optional<CurvePoint>& p) {
    return p ? fmt_real(p->granularity_us) : std::string();
  };
  return join({m.backend, m.pattern, std::to_string(m.cores), std::to_string(m.shards_per_core),
               std::to_string(m.width), std::to_string(m.steps), std::to_string(m.output_bytes),
               std::to_string(r.repetitions), fmt_real(res.threshold), std::string(to_string(res.state)),
               res.finite() ? fmt_real(res.metg_us) : std::string(), opt_gran(res.below), opt_gran(res.above),
               res.non_monotone ? "1" : "0", std::to_string(r.points), fmt_real(m.calibration_ns_per_iter),
               m.scheduler, m.tool_version, m.calibration_fingerprint, std::to_string(m.warmup_runs),
               fmt_real(m.peak_flops), std::to_string(m.flops_per_iteration)});
}

namespace detail {

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? line.size() - pos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

class Record {
 public:
  Record(const std::map<std::string, std::size_t>& index, std::vector<std::string> fields, std::size_t line)
      : index_(index), fields_(std::move(fields)), line_(line) {}

  const std::string& str(const std::string& col) const {
    auto it = index_.find(col);
    if (it == index_.end()) throw CsvError(fmt::format("missing column '{}'", col));
    return fields_.at(it->second);
  }

  double real(const std::string& col) const {
    const auto& s = str(col);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE)
      throw CsvError(fmt::format("line {}: '{}' is not a number in column '{}'", line_, s, col));
    return v;
  }

  template <class T = std::uint64_t>
  T integer(const std::string& col) const {
    const auto& s = str(col);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno == ERANGE)
      throw CsvError(fmt::format("line {}: '{}' is not an integer in column '{}'", line_, s, col));
    return static_cast<T>(v);
  }

 private:
  const std::map<std::string, std::size_t>& index_;
  std::vector<std::string> fields_;
  std::size_t line_;
};

template <class Fn>
void for_each_record(std::istream& in, const std::vector<std::string>& required, Fn&& fn) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < header.size(); ++k) index[header[k]] = k;
  for (const auto& c : required)
    if (!index.count(c)) throw CsvError(fmt::format("CSV header lacks column '{}'", c));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size())
      throw CsvError(fmt::format("line {}: {} fields, header has {}", lineno, fields.size(), header.size()));
    fn(Record(index, std::move(fields), lineno));
  }
}

inline RowMeta read_meta(const Record& r) {
  RowMeta m;
  m.backend = r.str("backend");
  m.pattern = r.str("pattern");
  m.cores = r.integer<std::uint32_t>("cores");
  m.shards_per_core = r.integer<std::uint32_t>("shards_per_core");
  m.width = r.integer<std::uint32_t>("width");
  m.steps = r.integer<std::uint32_t>("steps");
  m.output_bytes = r.integer("output_bytes");
  m.calibration_ns_per_iter = r.real("calibration_ns_per_iter");
  m.scheduler = r.str("scheduler");
  m.tool_version = r.str("tool_version");
  m.calibration_fingerprint = r.str("calibration_fingerprint");
  m.warmup_runs = r.integer<std::uint32_t>("warmup_runs");
  m.peak_flops = r.real("peak_flops");
  m.flops_per_iteration = r.integer<std::uint32_t>("flops_per_iteration");
  return m;
}

}  // namespace detail

inline std::vector<CurveRow> read_curves(std::istream& in) {
  std::vector<CurveRow> rows;
  detail::for_each_record(in, curve_columns(), [&](const detail::Record& r) {
    CurveRow row;
    row.meta = detail::read_meta(r);
    auto& p = row.point;
    p.grain_iterations = r.integer("grain_iterations");
    p.wall_seconds_mean = r.real("wall_seconds_mean");
    p.wall_seconds_ci99 = r.real("wall_seconds_ci99");
    p.flops = r.real("flops");
    p.flops_per_second = r.real("flops_per_second");
    p.efficiency = r.real("efficiency");
    p.granularity_us = r.real("granularity_us");
    p.repetitions = r.integer<std::uint32_t>("repetitions");
    rows.push_back(std::move(row));
  });
  return rows;
}

inline std::vector<CurveRow> read_curves_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(fmt::format("cannot open '{}'", path));
  return read_curves(in);
}

struct MetgFileRow {
  RowMeta meta;
  std::string state;
  std::optional<double> metg_us;
};

inline std::vector<MetgFileRow> read_metg(std::istream& in) {
  std::vector<MetgFileRow> rows;
  detail::for_each_record(in, metg_columns(), [&](const detail::Record& r) {
    MetgFileRow row;
    row.meta = detail::read_meta(r);
    row.state = r.str("state");
    if (!r.str("metg_us").empty()) row.metg_us = r.real("metg_us");
    rows.push_back(std::move(row));
  });
  return rows;
}

inline bool same_curve(const RowMeta& a, const RowMeta& b) { return a == b; }

/// Groups rows into curves in first-appearance order and computes METG for each.
inline std::vector<MetgRow> metg_table(const std::vector<CurveRow>& rows, double threshold = 0.5) {
  std::vector<std::pair<RowMeta, MetgCurve>> groups;
  for (const auto& row : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](auto& g) { return same_curve(g.first, row.meta); });
    if (it == groups.end()) {
      MetgCurve c;
      c.backend = row.meta.backend;
      c.pattern = row.meta.pattern;
      c.cores = row.meta.cores;
      c.shards_per_core = row.meta.shards_per_core;
      groups.emplace_back(row.meta, std::move(c));
      it = std::prev(groups.end());
    }
    it->second.points.push_back(row.point);
  }
  std::vector<MetgRow> out;
  for (auto& [meta, curve] : groups) {
    std::stable_sort(curve.points.begin(), curve.points.end(),
                     [](auto& a, auto& b) { return a.grain_iterations < b.grain_iterations; });
    MetgRow m;
    m.meta = meta;
    m.points = curve.points.size();
    m.repetitions = curve.points.empty() ? 0 : curve.points.front().repetitions;
    if (curve.points.size() >= 2) {
      m.result = compute_metg(curve, threshold);
    } else {
      // A single point cannot bracket a crossing; report by its side.
      m.result.threshold = threshold;
      const auto& p = curve.points.front();
      m.result.state = p.efficiency >= threshold ? MetgState::saturated : MetgState::unreachable;
      if (m.result.finite()) {
        m.result.metg_us = p.granularity_us;
        m.result.above = p;
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline std::string format_metg_csv(const std::vector<MetgRow>& rows) {
  std::string out = header_line(metg_columns()) + "\n";
  for (const auto& r : rows) out += format_metg_row(r) + "\n";
  return out;
}

inline std::string format_curves_csv(const std::vector<CurveRow>& rows) {
  std::string out = header_line(curve_columns()) + "\n";
  for (const auto& r : rows) out += format_curve_row(r) + "\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError(fmt::format("cannot open '{}' for writing", path));
  out << text;
  if (!out) throw CsvError(fmt::format("failed writing '{}'", path));
}

/// Appends one line, writing the header first when the file is new or empty.
inline void append_row(const std::string& path, const std::string& header, const std::string& row) {
  bool fresh = true;
  {
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    if (probe && probe.tellg() > 0) fresh = false;
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw CsvError(fmt::format("cannot open '{}' for appending", path));
  if (fresh) out << header << '\n';
  out << row << '\n';
  out.flush();
}

}  // namespace taskbench::io
