#pragma once

#include <string>
#include <vector>

namespace nrl {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> yerr;  // error bar half-lengths; empty = no bars
};

// Dependency-free line chart: axes, ticks, one polyline per series with
// vertical error bars and a small legend.
std::string render_line_chart(const std::string& title,
                              const std::string& xlabel,
                              const std::string& ylabel,
                              const std::vector<SvgSeries>& series);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace nrl
