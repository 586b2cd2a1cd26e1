#pragma once

// Compute-bound task kernel, host calibration and the calibration file.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

namespace taskbench {

enum class KernelKind { compute_bound, empty };

// Number of independent multiply-add chains carried in registers.
inline constexpr std::size_t kKernelAccumulators = 16;
// One multiply and one add per accumulator per iteration.
inline constexpr std::uint32_t kFlopsPerIteration = 2 * kKernelAccumulators;

struct KernelConfig {
  KernelKind kind = KernelKind::compute_bound;
  std::uint64_t iterations = 0;  // grain size

  static constexpr std::uint32_t flops_per_iteration = kFlopsPerIteration;

  std::uint64_t flops() const noexcept {
    return kind == KernelKind::compute_bound ? iterations * flops_per_iteration : 0;
  }

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

inline std::string_view to_string(KernelKind k) {
  return k == KernelKind::compute_bound ? "compute_bound" : "empty";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "compute_bound") return KernelKind::compute_bound;
  if (s == "empty") return KernelKind::empty;
  throw std::invalid_argument(fmt::format("unknown kernel kind '{}'", s));
}

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t kEmptyKernelChecksum = 0x6b65726e656c3030ULL;

namespace detail {

using f64x2 = double __attribute__((vector_size(16)));

// Kept out of line so every caller runs the same machine code: inlined into
// different backends the optimizer would vectorize some copies and not others.
[[gnu::noinline]] inline void kernel_loop(double* acc, std::uint64_t iterations) noexcept {
  constexpr double mul = 0.99999988079071044921875;  // 1 - 2^-23
  constexpr double add = 1.1920928955078125e-07;     // 2^-23
  constexpr std::size_t lanes = kKernelAccumulators / 2;
  const f64x2 m = {mul, mul};
  const f64x2 a = {add, add};
  f64x2 v[lanes];
  std::memcpy(v, acc, sizeof v);
  for (std::uint64_t it = 0; it < iterations; ++it) {
#pragma GCC unroll 8
    for (std::size_t k = 0; k < lanes; ++k) v[k] = v[k] * m + a;
  }
  std::memcpy(acc, v, sizeof v);
}

}  // namespace detail

/// Runs `iterations` rounds of kKernelAccumulators independent multiply-add
/// chains and folds the accumulators into a checksum. The accumulators start
/// from seed-derived values in [1, 2) and contract towards 1, so they never
/// overflow or go subnormal.
inline std::uint64_t execute_kernel(const KernelConfig& config, std::uint64_t seed) noexcept {
  if (config.kind == KernelKind::empty) return kEmptyKernelChecksum;

  alignas(16) std::array<double, kKernelAccumulators> acc;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    acc[k] = 1.0 + static_cast<double>(mix64(seed + k) >> 11) * 0x1.0p-53;
  }
  detail::kernel_loop(acc.data(), config.iterations);

  std::uint64_t h = mix64(seed);
  for (double a : acc) h = mix64(h ^ (std::bit_cast<std::uint64_t>(a) & 0xffffffffULL));
  return h;
}

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Calibration {
  double ns_per_iteration = 0.0;
  std::uint32_t samples = 0;
  double dispersion = 0.0;  // (max - min) / median over samples
  std::uint32_t flops_per_iteration = kFlopsPerIteration;
  std::string timestamp;
  std::string host;

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string host_id() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0 || buf[0] == '\0') return "unknown";
  std::string s(buf);
  std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '=' || c == ' '; }, '_');
  return s;
}

// Smallest observable nonzero step of the steady clock, in nanoseconds.
inline double clock_resolution_ns() {
  using clock = std::chrono::steady_clock;
  double best = 1e18;
  for (int probe = 0; probe < 16; ++probe) {
    const auto a = clock::now();
    auto b = clock::now();
    for (int spin = 0; b == a && spin < 10'000'000; ++spin) b = clock::now();
    if (b != a) best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

}  // namespace detail

inline volatile std::uint64_t kernel_sink = 0;

/// Times the kernel at doubling iteration counts until a single run exceeds
/// `target`, then takes `samples` runs at that size (restarting at a larger
/// size whenever a sample falls short). Single-threaded; run on an idle host.
inline Calibration calibrate(KernelKind kind, std::chrono::milliseconds target,
                             std::uint32_t samples = 5) {
  if (kind == KernelKind::empty) throw CalibrationError("empty kernel has nothing to calibrate");
  if (target < std::chrono::milliseconds(1))
    throw std::invalid_argument("calibration target must be at least 1 ms");
  if (samples < 5) throw std::invalid_argument("calibration needs at least 5 samples");

  const double target_ns = std::chrono::duration<double, std::nano>(target).count();
  if (detail::clock_resolution_ns() * 100.0 > target_ns)
    throw CalibrationError("monotonic clock cannot resolve the calibration target duration");

  using clock = std::chrono::steady_clock;
  auto time_once = [&](std::uint64_t iterations) {
    const KernelConfig cfg{kind, iterations};
    const auto t0 = clock::now();
    kernel_sink = kernel_sink + execute_kernel(cfg, iterations);
    const auto t1 = clock::now();
    return std::chrono::duration<double, std::nano>(t1 - t0).count();
  };

  std::uint64_t iterations = 1024;
  time_once(iterations);  // warm-up
  while (time_once(iterations) < target_ns) iterations *= 2;

  for (;;) {
    std::vector<double> per_iter;
    bool short_sample = false;
    for (std::uint32_t s = 0; s < samples; ++s) {
      const double ns = time_once(iterations);
      if (ns < target_ns) {
        short_sample = true;
        break;
      }
      per_iter.push_back(ns / static_cast<double>(iterations));
    }
    if (short_sample) {
      iterations *= 2;
      continue;
    }
    const double med = detail::median(per_iter);
    const auto [lo, hi] = std::minmax_element(per_iter.begin(), per_iter.end());
    Calibration c;
    c.ns_per_iteration = med;
    c.samples = samples;
    c.dispersion = (*hi - *lo) / med;
    c.timestamp = detail::utc_timestamp();
    c.host = detail::host_id();
    return c;
  }
}

/// cores * flops_per_iteration / seconds_per_iteration.
inline double peak_flops(const Calibration& c, std::uint32_t cores) {
  if (c.ns_per_iteration <= 0.0) throw std::invalid_argument("calibration has no ns_per_iteration");
  if (cores == 0) throw std::invalid_argument("cores must be positive");
  return static_cast<double>(cores) * c.flops_per_iteration / (c.ns_per_iteration * 1e-9);
}

// Calibration file: one `key = value` pair per line, '#' comments allowed.

inline std::string serialize_calibration(const Calibration& c) {
  return fmt::format(
      "# taskbench kernel calibration\n"
      "ns_per_iteration = {:.17g}\n"
      "flops_per_iteration = {}\n"
      "samples = {}\n"
      "dispersion = {:.17g}\n"
      "timestamp = {}\n"
      "host = {}\n",
      c.ns_per_iteration, c.flops_per_iteration, c.samples, c.dispersion, c.timestamp, c.host);
}

inline Calibration parse_calibration(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
      return s;
    };
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw CalibrationError(fmt::format("malformed calibration line '{}'", line));
    kv.emplace(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  auto need = [&](std::string_view key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw CalibrationError(fmt::format("calibration file lacks '{}'", key));
    return it->second;
  };
  Calibration c;
  try {
    c.ns_per_iteration = std::stod(need("ns_per_iteration"));
    c.flops_per_iteration = static_cast<std::uint32_t>(std::stoul(need("flops_per_iteration")));
    c.samples = static_cast<std::uint32_t>(std::stoul(need("samples")));
    c.dispersion = std::stod(need("dispersion"));
  } catch (const std::logic_error& e) {
    throw CalibrationError(fmt::format("bad numeric value in calibration file: {}", e.what()));
  }
  c.timestamp = need("timestamp");
  c.host = need("host");
  if (c.ns_per_iteration <= 0.0) throw CalibrationError("ns_per_iteration must be positive");
  if (c.flops_per_iteration != kFlopsPerIteration)
    throw CalibrationError(fmt::format("calibration was taken with {} flops/iteration, this build uses {}",
                                       c.flops_per_iteration, kFlopsPerIteration));
  return c;
}

inline void write_calibration_file(const std::string& path, const Calibration& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CalibrationError(fmt::format("cannot open '{}' for writing", path));
  out << serialize_calibration(c);
  if (!out) throw CalibrationError(fmt::format("failed writing '{}'", path));
}

inline Calibration read_calibration_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CalibrationError(fmt::format("cannot open calibration file '{}'", path));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_calibration(text);
}

/// Short stable tag identifying a calibration in output rows.
inline std::string calibration_fingerprint(const Calibration& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : serialize_calibration(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace taskbench
