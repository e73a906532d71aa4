#include "cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace falmkit::cli {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 64;
constexpr double kRight = 150;
constexpr double kTop = 40;
constexpr double kBottom = 56;
const char* const kPalette[] = {"#3b6ea5", "#d9822b", "#4f9d69", "#b5495b", "#7d5ba6", "#8c8c8c"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

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

struct Frame {
  double y_lo;
  double y_hi;
  [[nodiscard]] double plot_w() const { return kWidth - kLeft - kRight; }
  [[nodiscard]] double plot_h() const { return kHeight - kTop - kBottom; }
  [[nodiscard]] double y(double v) const { return kTop + plot_h() * (1.0 - (v - y_lo) / (y_hi - y_lo)); }
};

double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

void open_svg(std::ostringstream& out, const ChartText& text, const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  if (!text.stamp.empty()) out << "<!-- " << escape(text.stamp) << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(text.title)
      << "</text>\n";
  const double step = nice_step(f.y_hi - f.y_lo);
  for (double v = std::ceil(f.y_lo / step) * step; v <= f.y_hi + 1e-9 * step; v += step) {
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + f.plot_w() << "\" y1=\"" << num(f.y(v)) << "\" y2=\""
        << num(f.y(v)) << "\" stroke=\"#e0e0e0\"/>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.y(v) + 4) << "\" text-anchor=\"end\">"
        << num(std::abs(v) < 1e-12 ? 0.0 : v) << "</text>\n";
  }
  out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft << "\" y1=\"" << kTop << "\" y2=\"" << kTop + f.plot_h()
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft + f.plot_w() / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(text.x_label) << "</text>\n";
  out << "<text transform=\"translate(16 " << kTop + f.plot_h() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(text.y_label) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 8 + 18.0 * static_cast<double>(i);
    out << "<rect x=\"" << kWidth - kRight + 16 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[i % 6] << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 34 << "\" y=\"" << y + 1 << "\">" << escape(names[i]) << "</text>\n";
  }
}

}  // namespace

std::string bar_chart(const ChartText& text, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series, std::optional<double> y_max) {
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      for (double v : {s.values[i], i < s.error_low.size() ? s.error_low[i] : s.values[i],
                       i < s.error_high.size() ? s.error_high[i] : s.values[i]}) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
  }
  if (y_max) hi = *y_max;
  if (hi <= lo) hi = lo + 1.0;
  const Frame f{lo, hi};
  std::ostringstream out;
  open_svg(out, text, f);

  const double group_w = f.plot_w() / static_cast<double>(std::max<std::size_t>(1, categories.size()));
  const double bar_w = 0.8 * group_w / static_cast<double>(std::max<std::size_t>(1, series.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c);
    out << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(kTop + f.plot_h() + 16)
        << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !std::isfinite(series[s].values[c])) continue;
      const double v = series[s].values[c];
      const double x = gx + 0.1 * group_w + bar_w * static_cast<double>(s);
      const double y0 = f.y(std::max(0.0, lo));
      const double y1 = f.y(v);
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y0, y1)) << "\" width=\"" << num(bar_w)
          << "\" height=\"" << num(std::abs(y1 - y0)) << "\" fill=\"" << kPalette[s % 6] << "\"/>\n";
      if (c < series[s].error_low.size() && c < series[s].error_high.size() &&
          std::isfinite(series[s].error_low[c]) && std::isfinite(series[s].error_high[c])) {
        const double cx = x + bar_w / 2;
        out << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(f.y(series[s].error_low[c]))
            << "\" y2=\"" << num(f.y(series[s].error_high[c])) << "\" stroke=\"black\"/>\n";
      }
    }
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

std::string histogram(const ChartText& text, const std::vector<HistSeries>& series, double lo, double hi, int bins,
                      std::optional<double> marker) {
  if (bins < 1) bins = 1;
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  std::vector<std::vector<double>> counts(series.size(), std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  double top = 1.0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (double v : series[s].values) {
      if (!std::isfinite(v)) continue;
      const int b = std::clamp(static_cast<int>(std::floor((v - lo) / width)), 0, bins - 1);
      top = std::max(top, ++counts[s][static_cast<std::size_t>(b)]);
    }
  }
  const Frame f{0.0, top};
  std::ostringstream out;
  open_svg(out, text, f);
  auto x_of = [&](double v) { return kLeft + f.plot_w() * (v - lo) / (hi - lo); };
  const double tick = nice_step(hi - lo);
  for (double v = std::ceil(lo / tick) * tick; v <= hi + 1e-9 * tick; v += tick) {
    out << "<text x=\"" << num(x_of(v)) << "\" y=\"" << num(kTop + f.plot_h() + 16) << "\" text-anchor=\"middle\">"
        << num(v) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string path = "M" + num(x_of(lo)) + " " + num(f.y(0));
    for (int b = 0; b < bins; ++b) {
      const double y = f.y(counts[s][static_cast<std::size_t>(b)]);
      path += " L" + num(x_of(lo + b * width)) + " " + num(y) + " L" + num(x_of(lo + (b + 1) * width)) + " " + num(y);
    }
    path += " L" + num(x_of(hi)) + " " + num(f.y(0));
    out << "<path d=\"" << path << "\" fill=\"" << kPalette[s % 6] << "\" fill-opacity=\"0.25\" stroke=\""
        << kPalette[s % 6] << "\"/>\n";
  }
  if (marker && *marker >= lo && *marker <= hi) {
    out << "<line x1=\"" << num(x_of(*marker)) << "\" x2=\"" << num(x_of(*marker)) << "\" y1=\"" << kTop
        << "\" y2=\"" << kTop + f.plot_h() << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

}  // namespace falmkit::cli
