#include "cafv/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cafv/errors.hpp"

namespace cafv {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 620.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 350.0;

const char* kPalette[] = {"#4878a8", "#e8a33d", "#6aa84f", "#a85f78", "#8064a2"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
  // Round to keep coordinates short and stable; drop to-chars noise like
  // 155.00000000000003 from intermediate arithmetic.
  const double r = std::round(v * 100.0) / 100.0;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), r);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

void text(std::ostringstream& out, double x, double y, const std::string& value,
          const char* anchor, int size) {
  out << "  <text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">"
      << escape(value) << "</text>\n";
}

void line(std::ostringstream& out, double x1, double y1, double x2, double y2) {
  out << "  <line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
      << "\" y2=\"" << num(y2) << "\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
}

void rect(std::ostringstream& out, double x, double y, double w, double h,
          const char* fill) {
  out << "  <rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
}

}  // namespace

std::string bar_chart_svg(const std::string& title,
                          const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series) {
  if (categories.empty()) throw ValidationError("bar chart needs at least one category");
  if (series.empty()) throw ValidationError("bar chart needs at least one series");
  double y_max = 0.0;
  for (const BarSeries& s : series) {
    if (s.values.size() != categories.size()) {
      throw ValidationError("series '" + s.name + "' has " +
                            std::to_string(s.values.size()) + " values for " +
                            std::to_string(categories.size()) + " categories");
    }
    for (double v : s.values) {
      if (!(v >= 0.0)) throw ValidationError("bar values must be >= 0");
      y_max = std::max(y_max, v);
    }
  }
  if (y_max == 0.0) y_max = 1.0;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth)
      << "\" height=\"" << num(kHeight) << "\" viewBox=\"0 0 " << num(kWidth) << ' '
      << num(kHeight) << "\">\n";
  rect(out, 0, 0, kWidth, kHeight, "#ffffff");
  text(out, kWidth / 2, 24, title, "middle", 15);

  // Axes and horizontal ticks.
  line(out, kLeft, kTop, kLeft, kBottom);
  line(out, kLeft, kBottom, kRight, kBottom);
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = kBottom - frac * (kBottom - kTop);
    line(out, kLeft - 4, y, kLeft, y);
    text(out, kLeft - 8, y + 4, num(frac * y_max), "end", 11);
  }

  const double group_width = (kRight - kLeft) / static_cast<double>(categories.size());
  const double bar_width = group_width * 0.8 / static_cast<double>(series.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double group_x = kLeft + group_width * static_cast<double>(c);
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double h = series[s].values[c] / y_max * (kBottom - kTop);
      const double x = group_x + group_width * 0.1 + bar_width * static_cast<double>(s);
      rect(out, x, kBottom - h, bar_width, h, kPalette[s % kPaletteSize]);
    }
    text(out, group_x + group_width / 2, kBottom + 16, categories[c], "middle", 11);
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 16.0 * static_cast<double>(s);
    rect(out, kRight - 110, y - 9, 10, 10, kPalette[s % kPaletteSize]);
    text(out, kRight - 96, y, series[s].name, "start", 11);
  }

  out << "</svg>\n";
  return out.str();
}

}  // namespace cafv
