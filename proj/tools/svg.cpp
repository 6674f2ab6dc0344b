#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "kcc/csv.hpp"
#include "kcc/errors.hpp"

namespace kcc::svg {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;
constexpr double kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '&': r += "&amp;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e4)) {
    std::snprintf(buf, sizeof buf, "%.1e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

struct Range {
  double lo = 0, hi = 1;
  double map(double v, double px0, double px1) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

Range padded(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0, 1};
  if (hi - lo < 1e-300) {
    const double d = std::max(std::abs(lo) * 0.05, 0.5);
    return {lo - d, hi + d};
  }
  return {lo, hi};
}

// "Nice" step: 1, 2 or 5 times a power of ten, aiming at ~5 ticks.
std::vector<double> ticks(const Range& r) {
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9 * step; v += step) {
    t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return t;
}

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Range& xr, const Range& yr, const std::string& xl,
          const std::string& yl, bool log_y) {
  const double x0 = kLeft, x1 = kLeft + kPlotW, y0 = kTop + kPlotH, y1 = kTop;
  o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << kPlotW << "\" height=\"" << kPlotH
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(xr)) {
    const double px = xr.map(t, x0, x1);
    o << "<line x1=\"" << num(px) << "\" y1=\"" << y0 << "\" x2=\"" << num(px) << "\" y2=\"" << y0 + 5
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << num(px) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">" << tick_label(t)
      << "</text>\n";
  }
  for (double t : ticks(yr)) {
    const double py = yr.map(t, y0, y1);
    o << "<line x1=\"" << x0 - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << x0 << "\" y2=\"" << num(py)
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << x0 - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
      << tick_label(log_y ? std::pow(10.0, t) : t) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << escape(xl) << "</text>\n"
    << "<text x=\"16\" y=\"" << kTop + kPlotH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kTop + kPlotH / 2 << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string render(const LinePlot& plot) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  auto ty = [&](double y) { return plot.log_y ? std::log10(y) : y; };
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw ValidationError("plot series '" + s.label + "' has ragged data");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double y = ty(s.y[k]);
      if (!std::isfinite(s.x[k]) || !std::isfinite(y)) continue;
      xlo = std::min(xlo, s.x[k]);
      xhi = std::max(xhi, s.x[k]);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  const Range xr = padded(xlo, xhi), yr = padded(ylo, yhi);
  std::ostringstream o;
  header(o, plot.title);
  axes(o, xr, yr, plot.x_label, plot.y_label, plot.log_y);

  const double x0 = kLeft, x1 = kLeft + kPlotW, y0 = kTop + kPlotH, y1 = kTop;
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double y = ty(s.y[k]);
      if (!std::isfinite(s.x[k]) || !std::isfinite(y)) continue;
      o << num(xr.map(s.x[k], x0, x1)) << ',' << num(yr.map(y, y0, y1)) << ' ';
    }
    o << "\"/>\n";
    if (!s.label.empty()) {
      const double ly = kTop + 14 + 16 * static_cast<double>(i);
      o << "<line x1=\"" << x1 - 130 << "\" y1=\"" << ly - 4 << "\" x2=\"" << x1 - 110 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << x1 - 105 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string render(const Surface& s) {
  if (s.x.empty() || s.y.empty() || s.z.size() != s.y.size()) {
    throw ValidationError("surface plot: shape mismatch");
  }
  double zmax = 0.0;
  for (const auto& row : s.z) {
    if (row.size() != s.x.size()) throw ValidationError("surface plot: ragged rows");
    for (double v : row) {
      if (std::isfinite(v)) zmax = std::max(zmax, v);
    }
  }
  if (zmax <= 0.0) zmax = 1.0;

  // Cell edges halfway between the given centers.
  auto edges = [](const std::vector<double>& c) {
    std::vector<double> e(c.size() + 1);
    if (c.size() == 1) {
      e = {c[0] - 0.5, c[0] + 0.5};
      return e;
    }
    for (std::size_t k = 1; k < c.size(); ++k) e[k] = 0.5 * (c[k - 1] + c[k]);
    e.front() = c.front() - (e[1] - c.front());
    e.back() = c.back() + (c.back() - e[c.size() - 1]);
    return e;
  };
  const auto ex = edges(s.x), ey = edges(s.y);
  const Range xr{ex.front(), ex.back()}, yr{ey.front(), ey.back()};

  std::ostringstream o;
  header(o, s.title);
  const double x0 = kLeft, x1 = kLeft + kPlotW - 50, y0 = kTop + kPlotH, y1 = kTop;
  auto color = [&](double v) {
    // white to dark blue
    const double t = std::clamp(std::isfinite(v) ? v / zmax : 0.0, 0.0, 1.0);
    const int r = static_cast<int>(255 * (1 - 0.9 * t)), g = static_cast<int>(255 * (1 - 0.7 * t));
    const int b = static_cast<int>(255 * (1 - 0.3 * t));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    const double top = yr.map(ey[i + 1], y0, y1), bot = yr.map(ey[i], y0, y1);
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      const double l = xr.map(ex[j], x0, x1), r = xr.map(ex[j + 1], x0, x1);
      o << "<rect x=\"" << num(l) << "\" y=\"" << num(top) << "\" width=\"" << num(r - l + 0.3)
        << "\" height=\"" << num(bot - top + 0.3) << "\" fill=\"" << color(s.z[i][j]) << "\"/>\n";
    }
  }
  o << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << kPlotH
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(xr)) {
    const double px = xr.map(t, x0, x1);
    o << "<text x=\"" << num(px) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">" << tick_label(t)
      << "</text>\n";
  }
  for (double t : ticks(yr)) {
    o << "<text x=\"" << x0 - 8 << "\" y=\"" << num(yr.map(t, y0, y1) + 4) << "\" text-anchor=\"end\">"
      << tick_label(t) << "</text>\n";
  }
  // Color bar.
  const double cb = x1 + 15;
  for (int k = 0; k < 50; ++k) {
    const double h = kPlotH / 50.0;
    o << "<rect x=\"" << cb << "\" y=\"" << num(y0 - (k + 1) * h) << "\" width=\"12\" height=\"" << num(h + 0.3)
      << "\" fill=\"" << color(zmax * (k + 0.5) / 50.0) << "\"/>\n";
  }
  o << "<text x=\"" << cb + 14 << "\" y=\"" << y1 + 10 << "\" font-size=\"10\">" << tick_label(zmax) << "</text>\n"
    << "<text x=\"" << cb + 14 << "\" y=\"" << y0 << "\" font-size=\"10\">0</text>\n"
    << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << escape(s.x_label) << "</text>\n"
    << "<text x=\"16\" y=\"" << kTop + kPlotH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kTop + kPlotH / 2 << ")\">" << escape(s.y_label) << "</text>\n"
    << "</svg>\n";
  return o.str();
}

void write(const std::string& document, const std::string& path) {
  AtomicFile f(path);
  f.write(document);
  f.commit();
}

}  // namespace kcc::svg
