#pragma once

#include <optional>
#include <string>
#include <vector>

namespace falmkit::cli {

struct BarSeries {
  std::string name;
  std::vector<double> values;      // one per category; NaN leaves a gap
  std::vector<double> error_low;   // absolute lower whisker ends; empty for none
  std::vector<double> error_high;
};

struct ChartText {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string stamp;  // rendered as an XML comment when non-empty
};

/// Grouped bar chart. The y axis starts at min(0, data) and ends at the data maximum unless given.
std::string bar_chart(const ChartText& text, const std::vector<std::string>& categories,
                      const std::vector<BarSeries>& series, std::optional<double> y_max = std::nullopt);

struct HistSeries {
  std::string name;
  std::vector<double> values;
};

/// Overlaid outline histograms on shared bins, with an optional vertical marker line.
std::string histogram(const ChartText& text, const std::vector<HistSeries>& series, double lo, double hi, int bins,
                      std::optional<double> marker = std::nullopt);

}  // namespace falmkit::cli
