#pragma once

#include <string>
#include <vector>

namespace tgo {

/// Hand-emitted polyline chart. Pure function of its inputs.
std::string svg_line_chart(const std::string& title, const std::vector<double>& x,
                           const std::vector<double>& y);

/// Bar chart, one bar per labelled value.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

}  // namespace tgo
