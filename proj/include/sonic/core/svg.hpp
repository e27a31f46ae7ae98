#pragma once

// Deterministic SVG line plots and field heatmaps. Numbers are printed with a
// fixed format so identical data gives byte-identical files.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "sonic/core/field.hpp"

namespace sonic::svg {

inline std::string num(double v) {
  if (!std::isfinite(v)) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

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
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  return colors[k % 8];
}

/// Viridis-like ramp on [0, 1].
inline std::string ramp(double t) {
  static const std::array<std::array<double, 3>, 5> anchors{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140},
                                                             {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(t));
  const double s = t - k;
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(anchors[k][c] + s * (anchors[k + 1][c] - anchors[k][c])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool dashed = false;
  bool markers = false;
  std::string color;  // empty: palette
};

struct Annotation {
  double x, y;
  std::string text;
};

struct RefLine {
  bool vertical;
  double at;
  std::string label;
};

class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  LinePlot& add(Series s) {
    series_.push_back(std::move(s));
    return *this;
  }
  LinePlot& annotate(double x, double y, std::string text) {
    notes_.push_back({x, y, std::move(text)});
    return *this;
  }
  LinePlot& ref_line(bool vertical, double at, std::string label) {
    refs_.push_back({vertical, at, std::move(label)});
    return *this;
  }
  LinePlot& equal_aspect(bool on = true) {
    equal_ = on;
    return *this;
  }

  void write(std::ostream& os) const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto grow = [&](double x, double y) {
      if (!std::isfinite(x) || !std::isfinite(y)) return;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    };
    for (const auto& s : series_)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) grow(s.x[i], s.y[i]);
    for (const auto& n : notes_) grow(n.x, n.y);
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.04 * (x1 - x0), pady = 0.06 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    const double W = 640, H = 480, L = 70, R = 150, T = 40, B = 55;
    double pw = W - L - R, ph = H - T - B;
    if (equal_) {
      const double s = std::min(pw / (x1 - x0), ph / (y1 - y0));
      pw = s * (x1 - x0), ph = s * (y1 - y0);
    }
    auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
    auto Y = [&](double y) { return T + ph - (y - y0) / (y1 - y0) * ph; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_) << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
      os << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(T + ph + 16) << "\" text-anchor=\"middle\">" << num(xv)
         << "</text>\n";
      os << "<text x=\"" << L - 6 << "\" y=\"" << num(Y(yv) + 4) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(T + ph + 38) << "\" text-anchor=\"middle\">"
       << escape(xlabel_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << num(T + ph / 2) << ")\">" << escape(ylabel_) << "</text>\n";
    for (const auto& r : refs_) {
      if (r.vertical && r.at >= x0 && r.at <= x1)
        os << "<line x1=\"" << num(X(r.at)) << "\" y1=\"" << T << "\" x2=\"" << num(X(r.at)) << "\" y2=\"" << num(T + ph)
           << "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n<text x=\"" << num(X(r.at) + 3) << "\" y=\"" << T + 12
           << "\" fill=\"gray\">" << escape(r.label) << "</text>\n";
      if (!r.vertical && r.at >= y0 && r.at <= y1)
        os << "<line x1=\"" << L << "\" y1=\"" << num(Y(r.at)) << "\" x2=\"" << num(L + pw) << "\" y2=\"" << num(Y(r.at))
           << "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n<text x=\"" << num(L + pw - 3) << "\" y=\""
           << num(Y(r.at) - 3) << "\" text-anchor=\"end\" fill=\"gray\">" << escape(r.label) << "</text>\n";
    }
    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      const std::string col = s.color.empty() ? palette(k) : s.color;
      os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"";
      if (s.dashed) os << " stroke-dasharray=\"6,4\"";
      os << " points=\"";
      bool first = true;
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        os << (first ? "" : " ") << num(X(s.x[i])) << ',' << num(Y(s.y[i]));
        first = false;
      }
      os << "\"/>\n";
      if (s.markers)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
          if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
            os << "<circle cx=\"" << num(X(s.x[i])) << "\" cy=\"" << num(Y(s.y[i])) << "\" r=\"2.5\" fill=\"" << col
               << "\"/>\n";
      const double ly = T + 14 + 18 * static_cast<double>(k);
      os << "<line x1=\"" << num(L + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(L + pw + 32)
         << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << num(L + pw + 36) << "\" y=\"" << num(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    for (const auto& n : notes_) {
      os << "<circle cx=\"" << num(X(n.x)) << "\" cy=\"" << num(Y(n.y)) << "\" r=\"3.5\" fill=\"black\"/>\n";
      os << "<text x=\"" << num(X(n.x) + 6) << "\" y=\"" << num(Y(n.y) - 6) << "\">" << escape(n.text) << "</text>\n";
    }
    os << "</svg>\n";
  }

 private:
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  std::vector<Annotation> notes_;
  std::vector<RefLine> refs_;
  bool equal_ = false;
};

/// Cells of a Field2D colored by value (min to max), with a color bar.
inline void heatmap(std::ostream& os, const Field2D& F, const std::string& title, const std::string& xlabel = "x",
                    const std::string& ylabel = "y") {
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  double x0 = F.x(0), x1 = F.x(F.nx() - 1), y0 = vmin, y1 = -vmin;
  for (std::size_t i = 0; i < F.nx(); ++i)
    for (std::size_t j = 0; j < F.ny(); ++j) {
      vmin = std::min(vmin, F(i, j)), vmax = std::max(vmax, F(i, j));
      y0 = std::min(y0, F.y(i, j)), y1 = std::max(y1, F.y(i, j));
    }
  if (!(vmax > vmin)) vmax = vmin + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double W = 640, H = 480, L = 70, R = 110, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;
  auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
  auto Y = [&](double y) { return T + ph - (y - y0) / (y1 - y0) * ph; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  // at most ~160 x 160 quads; coarser fields are drawn cell by cell
  const std::size_t si = std::max<std::size_t>(1, (F.nx() - 1) / 160), sj = std::max<std::size_t>(1, (F.ny() - 1) / 160);
  for (std::size_t i = 0; i + 1 < F.nx(); i += si) {
    const std::size_t ii = std::min(i + si, F.nx() - 1);
    for (std::size_t j = 0; j + 1 < F.ny(); j += sj) {
      const std::size_t jj = std::min(j + sj, F.ny() - 1);
      const double v = 0.25 * (F(i, j) + F(ii, j) + F(i, jj) + F(ii, jj));
      const std::string c = ramp((v - vmin) / (vmax - vmin));
      os << "<polygon fill=\"" << c << "\" stroke=\"" << c << "\" stroke-width=\"0.3\" points=\"" << num(X(F.x(i)))
         << ',' << num(Y(F.y(i, j))) << ' ' << num(X(F.x(ii))) << ',' << num(Y(F.y(ii, j))) << ' ' << num(X(F.x(ii)))
         << ',' << num(Y(F.y(ii, jj))) << ' ' << num(X(F.x(i))) << ',' << num(Y(F.y(i, jj))) << "\"/>\n";
    }
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(T + ph + 16) << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(Y(yv) + 4) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  os << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(T + ph + 38) << "\" text-anchor=\"middle\">" << escape(xlabel)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(T + ph / 2) << ")\">" << escape(ylabel) << "</text>\n";
  const double cx = L + pw + 25;
  for (int k = 0; k < 50; ++k)
    os << "<rect x=\"" << num(cx) << "\" y=\"" << num(T + ph - (k + 1) * ph / 50) << "\" width=\"18\" height=\""
       << num(ph / 50 + 0.5) << "\" fill=\"" << ramp((k + 0.5) / 50) << "\"/>\n";
  os << "<text x=\"" << num(cx + 22) << "\" y=\"" << num(T + 10) << "\">" << num(vmax) << "</text>\n";
  os << "<text x=\"" << num(cx + 22) << "\" y=\"" << num(T + ph) << "\">" << num(vmin) << "</text>\n";
  os << "</svg>\n";
}

}  // namespace sonic::svg
