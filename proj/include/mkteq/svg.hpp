#pragma once

// Minimal self-contained SVG line charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace mkteq {

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional half-width of an error bar per point
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

// Roughly five ticks on a 1/2/5 step.
inline std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(t);
  return ticks;
}

}  // namespace detail

// NaN points are skipped and break the polyline.
inline std::string render_svg(const Chart& chart) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 55;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = 0.0, yhi = -std::numeric_limits<double>::infinity();
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i] - e);
      yhi = std::max(yhi, s.y[i] + e);
    }
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, yhi = 1;
  if (xhi - xlo <= 0) xlo -= 0.5, xhi += 0.5;
  if (!(yhi > ylo)) yhi = ylo + 1.0;
  yhi += 0.05 * (yhi - ylo);

  auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\" "
       "font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  o += "<text x=\"" + detail::num(W / 2 - R / 2 + L / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::xml_escape(chart.title) + "</text>\n";

  // Axes and ticks.
  o += "<g stroke=\"black\" fill=\"none\">\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(H - B) + "\" x2=\"" + detail::num(W - R) +
       "\" y2=\"" + detail::num(H - B) + "\"/>\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(T) + "\" x2=\"" + detail::num(L) +
       "\" y2=\"" + detail::num(H - B) + "\"/>\n";
  o += "</g>\n<g font-size=\"11\">\n";
  for (double t : detail::nice_ticks(xlo, xhi)) {
    const double x = px(t);
    o += "<line x1=\"" + detail::num(x) + "\" y1=\"" + detail::num(H - B) + "\" x2=\"" + detail::num(x) +
         "\" y2=\"" + detail::num(H - B + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + detail::num(x) + "\" y=\"" + detail::num(H - B + 18) + "\" text-anchor=\"middle\">" +
         detail::tick_label(t) + "</text>\n";
  }
  for (double t : detail::nice_ticks(ylo, yhi)) {
    const double y = py(t);
    o += "<line x1=\"" + detail::num(L - 5) + "\" y1=\"" + detail::num(y) + "\" x2=\"" + detail::num(L) +
         "\" y2=\"" + detail::num(y) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + detail::num(L - 8) + "\" y=\"" + detail::num(y + 4) + "\" text-anchor=\"end\">" +
         detail::tick_label(t) + "</text>\n";
  }
  o += "</g>\n";
  o += "<text x=\"" + detail::num((L + W - R) / 2) + "\" y=\"" + detail::num(H - 15) +
       "\" text-anchor=\"middle\">" + detail::xml_escape(chart.x_label) + "</text>\n";
  o += "<text x=\"18\" y=\"" + detail::num((T + H - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       detail::num((T + H - B) / 2) + ")\">" + detail::xml_escape(chart.y_label) + "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    o += "<g stroke=\"" + s.color + "\" fill=\"" + s.color + "\">\n";
    std::string path;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        path += ' ';
        continue;
      }
      const bool start = path.empty() || path.back() == ' ';
      path += (start ? "M" : "L") + detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i]));
    }
    // Drop the gap markers and split into separate subpaths.
    std::string d;
    for (char ch : path) {
      if (ch != ' ') d += ch;
    }
    if (!d.empty()) o += "<path d=\"" + d + "\" fill=\"none\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double x = px(s.x[i]);
      o += "<circle cx=\"" + detail::num(x) + "\" cy=\"" + detail::num(py(s.y[i])) + "\" r=\"3\"/>\n";
      if (i < s.err.size() && std::isfinite(s.err[i]) && s.err[i] > 0) {
        o += "<line x1=\"" + detail::num(x) + "\" y1=\"" + detail::num(py(s.y[i] - s.err[i])) + "\" x2=\"" +
             detail::num(x) + "\" y2=\"" + detail::num(py(s.y[i] + s.err[i])) + "\"/>\n";
      }
    }
    const double ly = T + 10 + 20.0 * static_cast<double>(k);
    o += "<line x1=\"" + detail::num(W - R + 15) + "\" y1=\"" + detail::num(ly) + "\" x2=\"" +
         detail::num(W - R + 40) + "\" y2=\"" + detail::num(ly) + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + detail::num(W - R + 46) + "\" y=\"" + detail::num(ly + 4) + "\" stroke=\"none\">" +
         detail::xml_escape(s.name) + "</text>\n";
    o += "</g>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace mkteq
