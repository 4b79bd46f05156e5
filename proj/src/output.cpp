#include "nmopto/output.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "nmopto/errors.hpp"

namespace nmopto {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != columns_) throw DomainError("CSV row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
  out_ << '\n';
}

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 150, kT = 40, kB = 50;
const char* kPalette[] = {"#d62728", "#2ca02c", "#1f77b4", "#000000", "#9467bd", "#ff7f0e", "#8c564b"};

std::ofstream open_svg(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw NumericError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out;
}

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                         const std::string& ylabel, const std::vector<Series2D>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kT + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  auto out = open_svg(path);
  out << "<text x=\"" << kL << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n"
      << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n"
      << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 12 << "\" font-size=\"12\">" << xlabel << "</text>\n"
      << "<text x=\"12\" y=\"" << kT + ph / 2 << "\" font-size=\"12\">" << ylabel << "</text>\n"
      << "<text x=\"" << kL << "\" y=\"" << kT + ph + 16 << "\" font-size=\"10\">" << format_double(x0) << "</text>\n"
      << "<text x=\"" << kL + pw - 30 << "\" y=\"" << kT + ph + 16 << "\" font-size=\"10\">" << format_double(x1)
      << "</text>\n"
      << "<text x=\"4\" y=\"" << kT + ph << "\" font-size=\"10\">" << format_double(y0) << "</text>\n"
      << "<text x=\"4\" y=\"" << kT + 10 << "\" font-size=\"10\">" << format_double(y1) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    out << "\"/>\n<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 16 * (si + 1) << "\" font-size=\"11\" fill=\""
        << color << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title, const std::vector<double>& xs,
                       const std::vector<double>& ys, const std::vector<std::vector<double>>& z) {
  double zmin = INFINITY, zmax = -INFINITY;
  for (const auto& r : z)
    for (double v : r)
      if (std::isfinite(v)) zmin = std::min(zmin, v), zmax = std::max(zmax, v);
  if (!(zmax > zmin)) zmax = zmin + 1;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  const double cw = pw / std::max<std::size_t>(xs.size(), 1), ch = ph / std::max<std::size_t>(ys.size(), 1);

  auto out = open_svg(path);
  out << "<text x=\"" << kL << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
  for (std::size_t iy = 0; iy < ys.size(); ++iy)
    for (std::size_t ix = 0; ix < xs.size(); ++ix) {
      const double u = std::clamp((z[iy][ix] - zmin) / (zmax - zmin), 0.0, 1.0);
      const int r = static_cast<int>(255 * u), b = static_cast<int>(255 * (1 - u));
      out << "<rect x=\"" << kL + ix * cw << "\" y=\"" << kT + (ys.size() - 1 - iy) * ch << "\" width=\"" << cw + 0.5
          << "\" height=\"" << ch + 0.5 << "\" fill=\"rgb(" << r << ",40," << b << ")\"/>\n";
    }
  out << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 16 << "\" font-size=\"11\">max " << format_double(zmax)
      << "</text>\n<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 32 << "\" font-size=\"11\">min "
      << format_double(zmin) << "</text>\n</svg>\n";
}

}  // namespace nmopto
