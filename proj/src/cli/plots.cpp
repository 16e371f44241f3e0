#include "shearo/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "shearo/core/error.hpp"
#include "shearo/core/image_io.hpp"

namespace shearo::cli {

namespace {

constexpr int kPlotSize = 480;
constexpr int kMargin = 56;

double px_x(double v) { return kMargin + v * (kPlotSize - 2 * kMargin); }
double px_y(double v) { return kPlotSize - kMargin - v * (kPlotSize - 2 * kMargin); }

void open_svg(std::ostringstream& svg, const std::string& title) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotSize << "\" height=\""
      << kPlotSize << "\" viewBox=\"0 0 " << kPlotSize << " " << kPlotSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kPlotSize / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">"
      << title << "</text>\n";
}

void axes(std::ostringstream& svg, const std::string& x_label, const std::string& y_label) {
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
      << kPlotSize - 2 * kMargin << "\" height=\"" << kPlotSize - 2 * kMargin
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    svg << "<text x=\"" << px_x(v) << "\" y=\"" << kPlotSize - kMargin + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << v
        << "</text>\n";
    svg << "<text x=\"" << kMargin - 8 << "\" y=\"" << px_y(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << v
        << "</text>\n";
    if (i > 0 && i < 4) {
      svg << "<line x1=\"" << px_x(v) << "\" y1=\"" << px_y(0) << "\" x2=\"" << px_x(v)
          << "\" y2=\"" << px_y(1) << "\" stroke=\"#dddddd\"/>\n";
      svg << "<line x1=\"" << px_x(0) << "\" y1=\"" << px_y(v) << "\" x2=\"" << px_x(1)
          << "\" y2=\"" << px_y(v) << "\" stroke=\"#dddddd\"/>\n";
    }
  }
  svg << "<text x=\"" << kPlotSize / 2 << "\" y=\"" << kPlotSize - 14
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kPlotSize / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 16 "
      << kPlotSize / 2 << ")\">" << y_label << "</text>\n";
}

void save_svg(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write plot: " + path.string());
  out << body;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series, bool diagonal_reference) {
  std::ostringstream svg;
  open_svg(svg, title);
  axes(svg, x_label, y_label);
  if (diagonal_reference)
    svg << "<line x1=\"" << px_x(0) << "\" y1=\"" << px_y(0) << "\" x2=\"" << px_x(1)
        << "\" y2=\"" << px_y(1) << "\" stroke=\"#999999\" stroke-dasharray=\"5,4\"/>\n";
  int legend_row = 0;
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
    for (const auto& [x, y] : s.points)
      svg << format_number(px_x(std::clamp(x, 0.0, 1.0))) << ","
          << format_number(px_y(std::clamp(y, 0.0, 1.0))) << " ";
    svg << "\"/>\n";
    svg << "<rect x=\"" << kMargin + 10 << "\" y=\"" << kMargin + 8 + 18 * legend_row
        << "\" width=\"14\" height=\"4\" fill=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << kMargin + 30 << "\" y=\"" << kMargin + 14 + 18 * legend_row
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.name << "</text>\n";
    ++legend_row;
  }
  svg << "</svg>\n";
  save_svg(path, svg.str());
}

void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<ScatterPoint>& points) {
  if (points.empty()) throw ValidationError("scatter plot needs points");
  double x_lo = points[0].x, x_hi = points[0].x, y_lo = points[0].y, y_hi = points[0].y;
  for (const auto& p : points) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  const double x_span = std::max(1e-12, x_hi - x_lo);
  const double y_span = std::max(1e-12, y_hi - y_lo);

  std::ostringstream svg;
  open_svg(svg, title);
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
      << kPlotSize - 2 * kMargin << "\" height=\"" << kPlotSize - 2 * kMargin
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& p : points) {
    const double nx = (p.x - x_lo) / x_span;
    const double ny = (p.y - y_lo) / y_span;
    svg << "<circle cx=\"" << format_number(px_x(nx)) << "\" cy=\"" << format_number(px_y(ny))
        << "\" r=\"3\" fill=\"" << (p.positive ? "#cc2222" : "#22aa44")
        << "\" fill-opacity=\"0.75\"/>\n";
  }
  svg << "<circle cx=\"" << kMargin + 14 << "\" cy=\"" << kMargin + 12
      << "\" r=\"4\" fill=\"#22aa44\"/><text x=\"" << kMargin + 24 << "\" y=\"" << kMargin + 16
      << "\" font-size=\"12\" font-family=\"sans-serif\">defect-free</text>\n";
  svg << "<circle cx=\"" << kMargin + 14 << "\" cy=\"" << kMargin + 30
      << "\" r=\"4\" fill=\"#cc2222\"/><text x=\"" << kMargin + 24 << "\" y=\"" << kMargin + 34
      << "\" font-size=\"12\" font-family=\"sans-serif\">defective</text>\n";
  svg << "</svg>\n";
  save_svg(path, svg.str());
}

void write_overlay_png(const std::filesystem::path& path, const Tensor& phase_hw,
                       const Tensor& heatmap_on_original_grid,
                       const std::vector<datamodel::BoundingBox>& ground_truth,
                       const std::vector<datamodel::BoundingBox>& detections) {
  if (!phase_hw.same_shape(heatmap_on_original_grid))
    throw ValidationError("overlay: heatmap grid must match the image");
  const std::int64_t h = phase_hw.dim(0), w = phase_hw.dim(1);
  double peak = 0.0;
  for (std::int64_t i = 0; i < heatmap_on_original_grid.numel(); ++i)
    peak = std::max(peak, heatmap_on_original_grid[i]);
  if (peak <= 0.0) peak = 1.0;

  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h * w * 3));
  constexpr double kPi = std::numbers::pi;
  for (std::int64_t i = 0; i < h * w; ++i) {
    const double base = std::clamp((phase_hw[i] + kPi) / (2.0 * kPi), 0.0, 1.0);
    const double a = std::clamp(heatmap_on_original_grid[i] / peak, 0.0, 1.0);
    // Blend toward red-yellow with the anomaly weight.
    const double r = base * (1.0 - a) + a;
    const double g = base * (1.0 - a) + 0.6 * a * a;
    const double b = base * (1.0 - a);
    rgb[static_cast<std::size_t>(3 * i) + 0] = static_cast<std::uint8_t>(std::lround(255.0 * r));
    rgb[static_cast<std::size_t>(3 * i) + 1] = static_cast<std::uint8_t>(std::lround(255.0 * g));
    rgb[static_cast<std::size_t>(3 * i) + 2] = static_cast<std::uint8_t>(std::lround(255.0 * b));
  }

  auto draw_box = [&](const datamodel::BoundingBox& box, std::uint8_t r, std::uint8_t g,
                      std::uint8_t b) {
    const auto x0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(box.x_min)), 0, w - 1);
    const auto x1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(box.x_max)), 0, w - 1);
    const auto y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(box.y_min)), 0, h - 1);
    const auto y1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(box.y_max)), 0, h - 1);
    auto put = [&](std::int64_t y, std::int64_t x) {
      const auto k = static_cast<std::size_t>(3 * (y * w + x));
      rgb[k] = r;
      rgb[k + 1] = g;
      rgb[k + 2] = b;
    };
    for (std::int64_t x = x0; x <= x1; ++x) {
      put(y0, x);
      put(y1, x);
    }
    for (std::int64_t y = y0; y <= y1; ++y) {
      put(y, x0);
      put(y, x1);
    }
  };
  for (const auto& box : ground_truth) draw_box(box, 40, 220, 60);
  for (const auto& box : detections) draw_box(box, 60, 120, 255);

  write_png_rgb(path, w, h, rgb);
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write csv: " + path.string());
  out << header << "\n";
  out.precision(12);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

}  // namespace shearo::cli
