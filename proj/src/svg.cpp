#include "awe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "awe/format.hpp"

namespace awe::svg {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 130, kTop = 40, kBottom = 60;
constexpr double kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;

const char* const kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"};

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  // Coordinates at 0.01 px keep files small and stable.
  return format_number(std::round(v * 100.0) / 100.0);
}

template <typename T, typename Key>
std::vector<std::string> ordered_unique(const std::vector<T>& items, Key key) {
  std::vector<std::string> out;
  for (const T& item : items)
    if (std::find(out.begin(), out.end(), key(item)) == out.end()) out.push_back(key(item));
  return out;
}

std::size_t position(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
}

/// Axis range padded to a "nice" step; always spans at least [lo, hi].
struct Axis {
  double lo = 0.0, hi = 1.0, step = 0.2;

  Axis(double data_lo, double data_hi) {
    if (!std::isfinite(data_lo) || !std::isfinite(data_hi)) data_lo = 0.0, data_hi = 1.0;
    if (data_hi <= data_lo) data_hi = data_lo + 1.0;
    const double raw = (data_hi - data_lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    step = (norm <= 1 ? 1 : norm <= 2 ? 2 : norm <= 5 ? 5 : 10) * mag;
    lo = std::floor(data_lo / step) * step;
    hi = std::ceil(data_hi / step) * step;
  }

  double y(double v) const { return kTop + kPlotH * (1.0 - (v - lo) / (hi - lo)); }
};

class Canvas {
 public:
  explicit Canvas(const Labels& labels) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    text(kWidth / 2 - kRight / 2 + kLeft / 2, 22, labels.title, "middle", 14);
    text(kLeft + kPlotW / 2, kHeight - 12, labels.x_label, "middle");
    out_ << "<text transform=\"translate(16," << num(kTop + kPlotH / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
         << escape(labels.y_label) << "</text>\n";
  }

  void y_axis(const Axis& axis) {
    for (double v = axis.lo; v <= axis.hi + axis.step * 1e-9; v += axis.step) {
      const double y = axis.y(v);
      line(kLeft, y, kLeft + kPlotW, y, "#e0e0e0");
      text(kLeft - 6, y + 4, format_number(std::round(v / axis.step) * axis.step), "end");
    }
    line(kLeft, kTop, kLeft, kTop + kPlotH, "black");
    line(kLeft, kTop + kPlotH, kLeft + kPlotW, kTop + kPlotH, "black");
  }

  void legend(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double y = kTop + 10 + 18.0 * static_cast<double>(i);
      rect(kLeft + kPlotW + 12, y - 9, 12, 12, color(i));
      text(kLeft + kPlotW + 30, y + 1, names[i], "start");
    }
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1) {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
         << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
  }

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
    out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
         << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, const char* anchor, int size = 12) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\"";
    if (size != 12) out_ << " font-size=\"" << size << "\"";
    out_ << '>' << escape(s) << "</text>\n";
  }

  void raw(const std::string& s) { out_ << s; }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

}  // namespace

std::string bar_chart(const Labels& labels, const std::vector<Bar>& bars, double reference) {
  const auto groups = ordered_unique(bars, [](const Bar& b) { return b.group; });
  const auto series = ordered_unique(bars, [](const Bar& b) { return b.series; });
  double lo = 0.0, hi = 0.0;
  for (const Bar& b : bars)
    if (std::isfinite(b.value)) lo = std::min(lo, b.value), hi = std::max(hi, b.value);
  if (std::isfinite(reference)) hi = std::max(hi, reference);
  const Axis axis(lo, hi);

  Canvas c(labels);
  c.y_axis(axis);
  const double slot = kPlotW / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = 0.8 * slot / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g)
    c.text(kLeft + slot * (static_cast<double>(g) + 0.5), kTop + kPlotH + 18, groups[g], "middle");
  for (const Bar& b : bars) {
    if (!std::isfinite(b.value)) continue;
    const std::size_t g = position(groups, b.group), s = position(series, b.series);
    const double x = kLeft + slot * static_cast<double>(g) + 0.1 * slot + bar_w * static_cast<double>(s);
    const double y0 = axis.y(0.0), y1 = axis.y(b.value);
    c.rect(x, std::min(y0, y1), bar_w, std::abs(y1 - y0), color(s));
  }
  if (std::isfinite(reference)) c.line(kLeft, axis.y(reference), kLeft + kPlotW, axis.y(reference), "black", 1.5);
  c.legend(series);
  return c.finish();
}

std::string line_chart(const Labels& labels, const std::vector<Series>& series) {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 0.0;
  bool first = true;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) x_lo = x_hi = x, first = false;
      x_lo = std::min(x_lo, x), x_hi = std::max(x_hi, x);
      if (std::isfinite(y)) y_lo = std::min(y_lo, y), y_hi = std::max(y_hi, y);
    }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  const Axis axis(y_lo, y_hi);
  const auto px = [&](double x) { return kLeft + kPlotW * (x - x_lo) / (x_hi - x_lo); };

  Canvas c(labels);
  c.y_axis(axis);
  for (double x = std::ceil(x_lo); x <= x_hi; x += 1.0)
    c.text(px(x), kTop + kPlotH + 18, format_number(x), "middle");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].name);
    std::ostringstream pts;
    for (const auto& [x, y] : series[i].points)
      if (std::isfinite(y)) pts << num(px(x)) << ',' << num(axis.y(y)) << ' ';
    c.raw("<polyline fill=\"none\" stroke=\"" + std::string(color(i)) + "\" stroke-width=\"2\" points=\"" + pts.str() +
          "\"/>\n");
    for (const auto& [x, y] : series[i].points)
      if (std::isfinite(y))
        c.raw("<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(axis.y(y)) + "\" r=\"3\" fill=\"" + color(i) + "\"/>\n");
  }
  c.legend(names);
  return c.finish();
}

std::string box_chart(const Labels& labels, const std::vector<Box>& boxes) {
  const auto groups = ordered_unique(boxes, [](const Box& b) { return b.group; });
  const auto series = ordered_unique(boxes, [](const Box& b) { return b.series; });
  double lo = 0.0, hi = 0.0;
  for (const Box& b : boxes) lo = std::min({lo, b.q1, b.mean}), hi = std::max({hi, b.q3, b.mean});
  const Axis axis(lo, hi);

  Canvas c(labels);
  c.y_axis(axis);
  const double slot = kPlotW / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double box_w = 0.8 * slot / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g)
    c.text(kLeft + slot * (static_cast<double>(g) + 0.5), kTop + kPlotH + 18, groups[g], "middle");
  for (const Box& b : boxes) {
    const std::size_t g = position(groups, b.group), s = position(series, b.series);
    const double x = kLeft + slot * static_cast<double>(g) + 0.1 * slot + box_w * static_cast<double>(s);
    c.rect(x + 2, axis.y(b.q3), box_w - 4, axis.y(b.q1) - axis.y(b.q3), color(s), "black");
    c.line(x + 2, axis.y(b.median), x + box_w - 2, axis.y(b.median), "black", 2);
    c.raw("<circle cx=\"" + num(x + box_w / 2) + "\" cy=\"" + num(axis.y(b.mean)) +
          "\" r=\"3\" fill=\"white\" stroke=\"black\"/>\n");
  }
  c.legend(series);
  return c.finish();
}

}  // namespace awe::svg
