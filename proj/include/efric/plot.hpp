// Static SVG views of series files. Values are only scaled onto the canvas.
#pragma once

#include <string>
#include <vector>

#include "efric/series.hpp"

namespace efric::cli {

enum class PlotKind { line, heatmap, quiver };

struct PlotSpec {
  PlotKind kind = PlotKind::line;
  std::string title;
  std::string x;               // abscissa column
  std::vector<std::string> y;  // line: one or more ordinates; heatmap: {row coord, value}; quiver: {y, u, v}
};

// Heatmap and quiver expect rows on a full lattice of (x, y) pairs.
std::string render_svg(const SeriesFile& s, const PlotSpec& p);
void emit_plot(const SeriesFile& s, const PlotSpec& p, const std::string& path);

}  // namespace efric::cli
