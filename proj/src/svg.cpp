#include "nrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nrl {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 600, kTop = 50, kBottom = 360;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                         "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string render_line_chart(const std::string& title,
                              const std::string& xlabel,
                              const std::string& ylabel,
                              const std::vector<SvgSeries>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const SvgSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = i < s.yerr.size() ? s.yerr[i] : 0.0;
      if (first) {
        xmin = xmax = s.x[i];
        ymin = s.y[i] - e;
        ymax = s.y[i] + e;
        first = false;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i] - e);
        ymax = std::max(ymax, s.y[i] + e);
      }
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) {
    return kLeft + (x - xmin) / (xmax - xmin) * (kRight - kLeft);
  };
  auto py = [&](double y) {
    return kBottom - (y - ymin) / (ymax - ymin) * (kBottom - kTop);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        "font-size=\"16\">"
     << title << "</text>\n";
  // axes
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
     << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
     << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 5.0;
    const double yv = ymin + (ymax - ymin) * t / 5.0;
    os << "<line x1=\"" << px(xv) << "\" y1=\"" << kBottom << "\" x2=\""
       << px(xv) << "\" y2=\"" << kBottom + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << kBottom + 20
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv)
       << "</text>\n";
    os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(yv) << "\" x2=\""
       << kLeft << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 15
     << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  os << "<text x=\"20\" y=\"" << (kTop + kBottom) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
     << (kTop + kBottom) / 2 << ")\">" << ylabel << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const SvgSeries& s = series[si];
    const char* color = kColors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      if (i < s.yerr.size() && s.yerr[i] > 0.0) {
        os << "<line x1=\"" << px(s.x[i]) << "\" y1=\""
           << py(s.y[i] - s.yerr[i]) << "\" x2=\"" << px(s.x[i]) << "\" y2=\""
           << py(s.y[i] + s.yerr[i]) << "\" stroke=\"" << color
           << "\" stroke-width=\"1.5\"/>\n";
      }
    }
    const double ly = kTop + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << kRight - 140 << "\" y1=\"" << ly << "\" x2=\""
       << kRight - 115 << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kRight - 110 << "\" y=\"" << ly + 4
       << "\" font-size=\"12\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace nrl
