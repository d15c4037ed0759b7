#include "efric/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace efric::cli {

namespace {

constexpr double W = 640, H = 440, L = 70, R = 20, T = 40, B = 50;

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

struct Range {
  double lo = 0, hi = 1;
  static Range of(const std::vector<double>& v) {
    Range r{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
    if (r.hi - r.lo <= 1e-300 * std::max(1.0, std::abs(r.lo))) r.lo -= 0.5, r.hi += 0.5;
    return r;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::string frame(const std::string& title, const std::string& xl, const std::string& yl, Range xr, Range yr) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  s += "<rect x=\"" + fmt(L) + "\" y=\"" + fmt(T) + "\" width=\"" + fmt(W - L - R) + "\" height=\"" +
       fmt(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt(W / 2) + "\" y=\"" + fmt(H - 10) + "\" text-anchor=\"middle\">" + xl + "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(H / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + fmt(H / 2) +
       ")\">" + yl + "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = xr.lo + (xr.hi - xr.lo) * i / 4, fy = yr.lo + (yr.hi - yr.lo) * i / 4;
    double px = xr.map(fx, L, W - R), py = yr.map(fy, H - B, T);
    s += "<text x=\"" + fmt(px) + "\" y=\"" + fmt(H - B + 16) + "\" text-anchor=\"middle\">" + fmt(fx) + "</text>\n";
    s += "<text x=\"" + fmt(L - 6) + "\" y=\"" + fmt(py + 4) + "\" text-anchor=\"end\">" + fmt(fy) + "</text>\n";
  }
  return s;
}

std::string label(const SeriesFile& s, const std::string& c) { return c + " [" + s.columns[s.column(c)].unit + "]"; }

// Maps each (x, y) lattice pair of the rows to cell indices.
struct Lattice {
  std::vector<double> xs, ys;
  std::map<double, int> xi, yi;
};

Lattice lattice(const std::vector<double>& x, const std::vector<double>& y) {
  Lattice g;
  for (double v : x) g.xi[v] = 0;
  for (double v : y) g.yi[v] = 0;
  for (auto& [v, i] : g.xi) i = int(g.xs.size()), g.xs.push_back(v);
  for (auto& [v, i] : g.yi) i = int(g.ys.size()), g.ys.push_back(v);
  if (g.xs.size() * g.ys.size() != x.size())
    throw SchemaMismatchError("rows do not form a full lattice (" + std::to_string(x.size()) + " rows for " +
                              std::to_string(g.xs.size()) + " x " + std::to_string(g.ys.size()) + " cells)");
  return g;
}

}  // namespace

std::string render_svg(const SeriesFile& s, const PlotSpec& p) {
  if (s.rows.empty()) throw SchemaMismatchError("series has no rows");
  std::vector<double> x = s.values(p.x);
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string out;
  switch (p.kind) {
    case PlotKind::line: {
      if (p.y.empty()) throw SchemaMismatchError("line plot needs at least one ordinate column");
      std::vector<std::vector<double>> ys;
      std::vector<double> all;
      for (const auto& c : p.y) ys.push_back(s.values(c)), all.insert(all.end(), ys.back().begin(), ys.back().end());
      Range xr = Range::of(x), yr = Range::of(all);
      out = frame(p.title, label(s, p.x), p.y.size() == 1 ? label(s, p.y[0]) : s.columns[s.column(p.y[0])].unit, xr, yr);
      for (std::size_t k = 0; k < ys.size(); ++k) {
        out += "<polyline fill=\"none\" stroke=\"" + std::string(colors[k % 6]) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
          out += fmt(xr.map(x[i], L, W - R)) + "," + fmt(yr.map(ys[k][i], H - B, T)) + " ";
        out += "\"/>\n";
        out += "<text x=\"" + fmt(W - R - 6) + "\" y=\"" + fmt(T + 16 + 14 * double(k)) + "\" text-anchor=\"end\" fill=\"" +
               colors[k % 6] + "\">" + p.y[k] + "</text>\n";
      }
      break;
    }
    case PlotKind::heatmap: {
      if (p.y.size() != 2) throw SchemaMismatchError("heatmap needs {row coordinate, value} columns");
      std::vector<double> y = s.values(p.y[0]), v = s.values(p.y[1]);
      Lattice g = lattice(x, y);
      Range xr = Range::of(x), yr = Range::of(y), vr = Range::of(v);
      out = frame(p.title + " (" + label(s, p.y[1]) + ", " + fmt(vr.lo) + " to " + fmt(vr.hi) + ")", label(s, p.x),
                  label(s, p.y[0]), xr, yr);
      double cw = (W - L - R) / double(g.xs.size()), ch = (H - T - B) / double(g.ys.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double f = vr.map(v[i], 0.0, 1.0);
        int r = int(255 * std::clamp(1.5 * f - 0.2, 0.0, 1.0)), gg = int(255 * std::clamp(1.5 * f - 0.7, 0.0, 1.0)),
            b = int(255 * std::clamp(0.6 - std::abs(f - 0.3), 0.0, 1.0));
        char col[16];
        std::snprintf(col, sizeof col, "#%02x%02x%02x", r, gg, b);
        out += "<rect x=\"" + fmt(L + cw * g.xi[x[i]]) + "\" y=\"" + fmt(H - B - ch * (g.yi[y[i]] + 1)) +
               "\" width=\"" + fmt(cw + 0.3) + "\" height=\"" + fmt(ch + 0.3) + "\" fill=\"" + col + "\"/>\n";
      }
      break;
    }
    case PlotKind::quiver: {
      if (p.y.size() != 3) throw SchemaMismatchError("quiver needs {y, u, v} columns");
      std::vector<double> y = s.values(p.y[0]), u = s.values(p.y[1]), v = s.values(p.y[2]);
      Lattice g = lattice(x, y);
      Range xr = Range::of(x), yr = Range::of(y);
      out = frame(p.title + " (" + p.y[1] + ", " + p.y[2] + ")", label(s, p.x), label(s, p.y[0]), xr, yr);
      double mag = 0;
      for (std::size_t i = 0; i < u.size(); ++i) mag = std::max(mag, std::hypot(u[i], v[i]));
      double cell = std::min((W - L - R) / double(g.xs.size()), (H - T - B) / double(g.ys.size()));
      double scale = mag > 0 ? 0.9 * cell / mag : 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        double px = xr.map(x[i], L + cell / 2, W - R - cell / 2), py = yr.map(y[i], H - B - cell / 2, T + cell / 2);
        out += "<line x1=\"" + fmt(px) + "\" y1=\"" + fmt(py) + "\" x2=\"" + fmt(px + scale * u[i]) + "\" y2=\"" +
               fmt(py - scale * v[i]) + "\" stroke=\"#1f77b4\"/>\n";
        out += "<circle cx=\"" + fmt(px) + "\" cy=\"" + fmt(py) + "\" r=\"1\" fill=\"#1f77b4\"/>\n";
      }
      break;
    }
  }
  return out + "</svg>\n";
}

void emit_plot(const SeriesFile& s, const PlotSpec& p, const std::string& path) {
  std::string svg = render_svg(s, p);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << svg;
}

}  // namespace efric::cli
