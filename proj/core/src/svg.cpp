#include "tgo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tgo {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 50.0;

std::string num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  // axes
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<double>& x,
                           const std::vector<double>& y) {
  std::ostringstream out;
  open_svg(out, title);
  if (!x.empty() && x.size() == y.size()) {
    double xmin = *std::min_element(x.begin(), x.end());
    double xmax = *std::max_element(x.begin(), x.end());
    double ymin = *std::min_element(y.begin(), y.end());
    double ymax = *std::max_element(y.begin(), y.end());
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;

    out << "<text x=\"" << kMargin << "\" y=\"" << kMargin - 8
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << num(ymax) << "</text>\n";
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << num(ymin) << "</text>\n";

    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      double px = kMargin + (x[i] - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin);
      double py = kHeight - kMargin - (y[i] - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin);
      if (i) out << ' ';
      out << num(px) << ',' << num(py);
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  std::ostringstream out;
  open_svg(out, title);
  if (!values.empty() && labels.size() == values.size()) {
    double vmin = std::min(0.0, *std::min_element(values.begin(), values.end()));
    double vmax = std::max(0.0, *std::max_element(values.begin(), values.end()));
    if (vmax == vmin) vmax = vmin + 1.0;
    double span = kWidth - 2 * kMargin;
    double bar_w = span / static_cast<double>(values.size()) * 0.7;
    double gap = span / static_cast<double>(values.size());
    auto y_of = [&](double v) {
      return kHeight - kMargin - (v - vmin) / (vmax - vmin) * (kHeight - 2 * kMargin);
    };
    for (std::size_t i = 0; i < values.size(); ++i) {
      double x0 = kMargin + gap * static_cast<double>(i) + (gap - bar_w) / 2;
      double y_top = std::min(y_of(values[i]), y_of(0.0));
      double h = std::abs(y_of(values[i]) - y_of(0.0));
      out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y_top) << "\" width=\"" << num(bar_w)
          << "\" height=\"" << num(h) << "\" fill=\"steelblue\"/>\n";
      out << "<text x=\"" << num(x0 + bar_w / 2) << "\" y=\"" << kHeight - kMargin + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << labels[i]
          << "</text>\n";
    }
    out << "<text x=\"" << kMargin << "\" y=\"" << kMargin - 8
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << num(vmax) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace tgo
