#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace amclip::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with axes, tick labels and a legend. Axis ranges cover all series.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace amclip::cli
