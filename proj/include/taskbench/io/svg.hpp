#pragma once

// Self-contained SVG line charts with log-log axes. Presentation only: the
// plotted values come straight from the CSV rows.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "taskbench/io/csv.hpp"

namespace taskbench::io {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> xy;  // positive values only
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> reference_y;  // dashed horizontal line
  std::string reference_label;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[k % 10];
}

}  // namespace detail

inline std::string render_loglog_chart(const ChartSpec& spec) {
  constexpr double W = 760, H = 480, left = 80, right = 220, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double xmin = std::numeric_limits<double>::max(), xmax = 0, ymin = xmin, ymax = 0;
  for (const auto& s : spec.series)
    for (auto [x, y] : s.xy) {
      if (x <= 0 || y <= 0) continue;
      xmin = std::min(xmin, x), xmax = std::max(xmax, x);
      ymin = std::min(ymin, y), ymax = std::max(ymax, y);
    }
  if (spec.reference_y && *spec.reference_y > 0) {
    ymin = std::min(ymin, *spec.reference_y);
    ymax = std::max(ymax, *spec.reference_y);
  }
  if (xmax == 0) xmin = 1, xmax = 10;
  if (ymax == 0) ymin = 1, ymax = 10;
  const double lx0 = std::floor(std::log10(xmin)), lx1 = std::max(lx0 + 1, std::ceil(std::log10(xmax)));
  const double ly0 = std::floor(std::log10(ymin)), ly1 = std::max(ly0 + 1, std::ceil(std::log10(ymax)));
  auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
  auto py = [&](double y) { return top + ph - (std::log10(y) - ly0) / (ly1 - ly0) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      W, H, left + pw / 2, detail::escape(spec.title));

  for (double e = lx0; e <= lx1; ++e) {
    const double x = px(std::pow(10.0, e));
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" stroke=\"#ddd\"/>\n", x, top, top + ph);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">1e{}</text>\n", x, top + ph + 18, e);
  }
  for (double e = ly0; e <= ly1; ++e) {
    const double y = py(std::pow(10.0, e));
    out += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>\n", left, y, left + pw);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">1e{}</text>\n", left - 6, y + 4, e);
  }
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top, pw, ph);
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, H - 15,
                     detail::escape(spec.x_label));
  out += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     top + ph / 2, detail::escape(spec.y_label));

  if (spec.reference_y && *spec.reference_y > 0) {
    const double y = py(*spec.reference_y);
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n",
        left, y, left + pw);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" fill=\"red\" text-anchor=\"end\">{}</text>\n", left + pw - 4,
                       y - 4, detail::escape(spec.reference_label));
  }

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    std::string pts;
    for (auto [x, y] : s.xy)
      if (x > 0 && y > 0) pts += fmt::format("{:.1f},{:.1f} ", px(x), py(y));
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
                       detail::palette(k), pts);
    for (auto [x, y] : s.xy)
      if (x > 0 && y > 0)
        out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px(x), py(y), detail::palette(k));
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       left + pw + 12, ly, left + pw + 36, detail::palette(k));
    out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", left + pw + 42, ly + 4, detail::escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

inline std::string series_label(const RowMeta& m) {
  return fmt::format("{} N={} [{}]", m.backend, m.shards_per_core, m.scheduler);
}

namespace detail {

template <class XY>
std::vector<Series> group_series(const std::vector<CurveRow>& rows, XY&& xy) {
  std::vector<Series> out;
  std::vector<RowMeta> keys;
  for (const auto& r : rows) {
    auto it = std::find(keys.begin(), keys.end(), r.meta);
    std::size_t k = static_cast<std::size_t>(it - keys.begin());
    if (it == keys.end()) {
      keys.push_back(r.meta);
      out.push_back({series_label(r.meta), {}});
    }
    out[k].xy.push_back(xy(r));
  }
  for (auto& s : out) std::sort(s.xy.begin(), s.xy.end());
  return out;
}

}  // namespace detail

/// Efficiency vs task granularity, with the 50% line.
inline std::string plot_efficiency(const std::vector<CurveRow>& rows, double threshold = 0.5) {
  ChartSpec c;
  c.title = "Efficiency vs task granularity";
  c.x_label = "task granularity (us)";
  c.y_label = "efficiency";
  c.series = detail::group_series(rows, [](const CurveRow& r) {
    return std::pair{r.point.granularity_us, r.point.efficiency};
  });
  c.reference_y = threshold;
  c.reference_label = fmt::format("{:.0f}% efficiency", threshold * 100);
  return render_loglog_chart(c);
}

/// FLOP/s vs grain size, with half of the normalization peak marked.
inline std::string plot_flops(const std::vector<CurveRow>& rows) {
  ChartSpec c;
  c.title = "FLOP/s vs grain size";
  c.x_label = "grain size (iterations)";
  c.y_label = "FLOP/s";
  c.series = detail::group_series(rows, [](const CurveRow& r) {
    return std::pair{static_cast<double>(r.point.grain_iterations), r.point.flops_per_second};
  });
  if (!rows.empty() && rows.front().meta.peak_flops > 0) {
    c.reference_y = 0.5 * rows.front().meta.peak_flops;
    c.reference_label = "50% peak";
  }
  return render_loglog_chart(c);
}

/// METG vs tasks per core, one series per backend/scheduler.
inline std::string plot_metg(const std::vector<MetgFileRow>& rows) {
  ChartSpec c;
  c.title = "METG vs tasks per core";
  c.x_label = "tasks per core";
  c.y_label = "METG (us)";
  std::vector<std::string> labels;
  for (const auto& r : rows) {
    if (!r.metg_us) continue;
    const auto label = fmt::format("{} {} [{}]", r.meta.backend, r.meta.pattern, r.meta.scheduler);
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      labels.push_back(label);
      c.series.push_back({label, {}});
      it = std::prev(labels.end());
    }
    c.series[static_cast<std::size_t>(it - labels.begin())].xy.emplace_back(r.meta.shards_per_core, *r.metg_us);
  }
  for (auto& s : c.series) std::sort(s.xy.begin(), s.xy.end());
  return render_loglog_chart(c);
}

}  // namespace taskbench::io
