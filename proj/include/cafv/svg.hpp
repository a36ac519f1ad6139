#pragma once

#include <string>
#include <vector>

namespace cafv {

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one per category, >= 0
};

// Minimal dependency-free grouped bar chart (bars, axes, tick labels and a
// legend) on a fixed 640x400 canvas. Output is a pure function of the
// inputs, so identical data yields byte-identical SVG.
std::string bar_chart_svg(const std::string& title,
                          const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series);

}  // namespace cafv
