#ifndef TABCL_REPORT_PLOT_HPP
#define TABCL_REPORT_PLOT_HPP

#include "tabcl/harness/run.hpp"

#include <string>
#include <vector>

namespace tabcl {

struct PlotSeries {
  std::string label;
  std::vector<Scalar> x;
  std::vector<Scalar> y;
  std::vector<Scalar> y_lo; // optional seed-spread band
  std::vector<Scalar> y_hi;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

// One curve per strategy: mean per-increment accuracy across seeds, with a
// min/max band. Legend order follows the report's method order.
PlotSpec accuracy_curves_spec(const std::vector<RunResult>& runs, const std::string& scenario);
// Cumulative training seconds per task.
PlotSpec time_curves_spec(const std::vector<RunResult>& runs, const std::string& scenario);

// The SVG embeds the plotted values at full precision in a metadata block;
// the PNG is drawn into an RGB canvas and deflate-compressed.
void write_svg(const PlotSpec& spec, const std::string& path);
void write_png(const PlotSpec& spec, const std::string& path);

// Parses the metadata block back out of a written SVG (data-fidelity checks).
std::string read_svg_metadata(const std::string& path);

} // namespace tabcl

#endif
