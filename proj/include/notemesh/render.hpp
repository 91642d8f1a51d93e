#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "notemesh/errors.hpp"
#include "notemesh/eval.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/score.hpp"

namespace notemesh {

struct PlotOptions {
  int first_bar = 0;
  std::optional<int> last_bar;  // exclusive; defaults to the track's bar count
  Subdivision subdivision = Subdivision::quarter;
  std::size_t track_index = 0;
  bool show_bar_labels = true;
  int width_px = 1200;
  int height_px = 480;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

inline std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters are not allowed in XML 1.0 text.
        if (static_cast<unsigned char>(c) >= 0x20 || c == '\t' || c == '\n') out += c;
    }
  }
  return out;
}

inline std::string svg_open(int width, int height) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) + "\">\n";
}

}  // namespace detail

inline constexpr int kPlotMarginLeft = 48;
inline constexpr int kPlotMarginRight = 8;
inline constexpr int kPlotMarginBottom = 8;

inline int plot_margin_top(const PlotOptions& o) { return o.show_bar_labels ? 22 : 8; }

/// Pianoroll of one track over a bar range: one row per pitch, thin lines per
/// subdivision, thick lines per barline, note opacity from velocity.
inline std::string render_pianoroll_svg(const Score& score, const PlotOptions& options) {
  if (options.track_index >= score.instruments.size()) {
    throw TrackOutOfRange("track " + std::to_string(options.track_index) + " requested, score has " +
                          std::to_string(score.instruments.size()));
  }
  const Instrument& inst = score.instruments[options.track_index];
  const int default_last =
      std::max<int>(1, static_cast<int>(bar_spans_covering(score.time_sig_map, score.tpqn, last_note_end(inst)).size()));
  const int first = options.first_bar;
  const int last = options.last_bar.value_or(default_last);
  if (first < 0 || first >= last) {
    throw EmptyRange("bar range " + std::to_string(first) + ":" + std::to_string(last) + " is empty");
  }

  const auto all_spans = bar_spans_count(score.time_sig_map, score.tpqn, last);
  const std::vector<BarSpan> spans(all_spans.begin() + first, all_spans.end());
  const Tick range_start = spans.front().start_ticks;
  const Tick range_end = spans.back().end_ticks;

  std::vector<const Note*> visible;
  for (const Note& n : inst.notes) {
    if (n.start_ticks >= range_start && n.start_ticks < range_end) visible.push_back(&n);
  }
  int lo = 48, hi = 72;
  if (!visible.empty()) {
    const auto [mn, mx] = std::minmax_element(visible.begin(), visible.end(),
                                              [](const Note* a, const Note* b) { return a->pitch < b->pitch; });
    lo = std::max(0, (*mn)->pitch - 2);
    hi = std::min(127, (*mx)->pitch + 2);
  }

  const double left = kPlotMarginLeft;
  const double top = plot_margin_top(options);
  const double plot_w = options.width_px - kPlotMarginLeft - kPlotMarginRight;
  const double plot_h = options.height_px - top - kPlotMarginBottom;
  const double row_h = plot_h / (hi - lo + 1);
  const auto x_of = [&](Tick t) {
    return left + plot_w * static_cast<double>(t - range_start) / static_cast<double>(range_end - range_start);
  };
  const auto y_of = [&](int pitch) { return top + row_h * (hi - pitch); };
  using detail::num;

  std::string svg = detail::svg_open(options.width_px, options.height_px);
  svg += "<title>" + detail::xml_escape(inst.name.empty() ? "track " + std::to_string(options.track_index) : inst.name) +
         "</title>\n";
  svg += "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + std::to_string(options.width_px) +
         "\" height=\"" + std::to_string(options.height_px) + "\" fill=\"#ffffff\"/>\n";

  for (int p = hi; p >= lo; --p) {
    const bool black = (p % 12 == 1 || p % 12 == 3 || p % 12 == 6 || p % 12 == 8 || p % 12 == 10);
    svg += "<rect class=\"row\" x=\"" + num(left) + "\" y=\"" + num(y_of(p)) + "\" width=\"" + num(plot_w) +
           "\" height=\"" + num(row_h) + "\" fill=\"" + (black ? "#ececec" : "#f8f8f8") + "\"/>\n";
    if (p % 12 == 0) {
      svg += "<text class=\"pitch-label\" x=\"" + num(left - 4) + "\" y=\"" + num(y_of(p) + row_h * 0.8) +
             "\" font-size=\"10\" text-anchor=\"end\">" + pitch_to_name(p) + "</text>\n";
    }
  }

  const Tick g = std::max<Tick>(1, grid_ticks(options.subdivision, score.tpqn));
  const auto vline = [&](Tick t, bool bar) {
    const std::string x = num(x_of(t));
    svg += std::string("<line class=\"vgrid ") + (bar ? "bar" : "sub") + "\" x1=\"" + x + "\" y1=\"" + num(top) +
           "\" x2=\"" + x + "\" y2=\"" + num(top + plot_h) + "\" stroke=\"" + (bar ? "#444444" : "#bbbbbb") +
           "\" stroke-width=\"" + (bar ? "2" : "0.5") + "\"/>\n";
  };
  for (const BarSpan& bar : spans) {
    vline(bar.start_ticks, true);
    for (Tick t = bar.start_ticks + g; t < bar.end_ticks; t += g) vline(t, false);
    if (options.show_bar_labels) {
      svg += "<text class=\"bar-label\" x=\"" + num(x_of(bar.start_ticks) + 3) + "\" y=\"" + num(top - 6) +
             "\" font-size=\"11\">" + std::to_string(bar.index + 1) + "</text>\n";
    }
  }
  vline(range_end, true);

  for (const Note* n : visible) {
    const double x = x_of(n->start_ticks);
    const double w = x_of(std::min(n->end_ticks, range_end)) - x;
    const double opacity = 0.4 + 0.6 * std::clamp(n->velocity, 0, 127) / 127.0;
    svg += "<rect class=\"note\" x=\"" + num(x) + "\" y=\"" + num(y_of(n->pitch)) + "\" width=\"" + num(w) +
           "\" height=\"" + num(row_h) + "\" fill=\"#2a6fdb\" fill-opacity=\"" + num(opacity) + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

/// Line plot of the intra/inter densities of one evaluated feature.
inline std::string render_pdf_svg(const FeatureReport& report, int width = 480, int height = 320) {
  using detail::num;
  const double left = 40, right = 10, top = 24, bottom = 24;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const auto& grid = report.inter.grid;
  double ymax = 0.0;
  for (const Pdf* p : {&report.intra_a, &report.intra_b, &report.inter}) {
    for (double d : p->density) ymax = std::max(ymax, d);
  }
  if (ymax <= 0.0) ymax = 1.0;
  const double x0 = grid.empty() ? 0.0 : grid.front();
  const double x1 = grid.empty() ? 1.0 : grid.back();

  std::string svg = detail::svg_open(width, height);
  svg += "<title>" + std::string(feature_code(report.kind)) + "</title>\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" fill=\"#ffffff\"/>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
         num(plot_h) + "\" fill=\"none\" stroke=\"#444444\"/>\n";
  svg += "<text x=\"" + num(left) + "\" y=\"16\" font-size=\"12\">" + std::string(feature_code(report.kind)) +
         " OA(a)=" + num(report.oa_a_inter) + " KLD(a)=" + num(report.kld_a_inter) + "</text>\n";

  const struct {
    const Pdf* pdf;
    const char* name;
    const char* color;
  } curves[] = {{&report.intra_a, "intra_a", "#2a6fdb"},
                {&report.intra_b, "intra_b", "#db6f2a"},
                {&report.inter, "inter", "#333333"}};
  for (const auto& c : curves) {
    svg += "<polyline class=\"" + std::string(c.name) + "\" fill=\"none\" stroke=\"" + c.color +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.pdf->grid.size(); ++i) {
      const double x = left + plot_w * (c.pdf->grid[i] - x0) / (x1 - x0);
      const double y = top + plot_h * (1.0 - c.pdf->density[i] / ymax);
      if (i) svg += ' ';
      svg += num(x) + "," + num(y);
    }
    svg += "\"/>\n";
  }
  svg += "<text x=\"" + num(left) + "\" y=\"" + num(height - 6.0) + "\" font-size=\"10\">" + num(x0) +
         "</text>\n";
  svg += "<text x=\"" + num(left + plot_w) + "\" y=\"" + num(height - 6.0) +
         "\" font-size=\"10\" text-anchor=\"end\">" + num(x1) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace notemesh
