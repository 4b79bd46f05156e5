#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nmopto {

/// CSV with a mandatory header; doubles printed with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);
  void row(std::span<const double> values);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

std::string format_double(double v);

struct Series2D {
  std::string label;
  std::vector<double> x, y;
};

// Minimal SVG renderings without external dependencies.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                         const std::string& ylabel, const std::vector<Series2D>& series);
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title, const std::vector<double>& xs,
                       const std::vector<double>& ys, const std::vector<std::vector<double>>& z);

}  // namespace nmopto
