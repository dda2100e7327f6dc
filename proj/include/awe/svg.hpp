#ifndef AWE_SVG_HPP_
#define AWE_SVG_HPP_

#include <limits>
#include <string>
#include <utility>
#include <vector>

// Minimal SVG charts: axes, bars, polylines and boxes.
namespace awe::svg {

struct Bar {
  std::string group;  // x-axis category
  std::string series;  // legend entry; bars of one group sit side by side
  double value = 0.0;
};

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Box {
  std::string group;
  std::string series;
  double q1 = 0.0, median = 0.0, q3 = 0.0, mean = 0.0;
};

struct Labels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Optional horizontal reference line (e.g. chance level); NaN disables it.
std::string bar_chart(const Labels& labels, const std::vector<Bar>& bars, double reference = std::numeric_limits<double>::quiet_NaN());
std::string line_chart(const Labels& labels, const std::vector<Series>& series);
std::string box_chart(const Labels& labels, const std::vector<Box>& boxes);

}  // namespace awe::svg

#endif  // AWE_SVG_HPP_
