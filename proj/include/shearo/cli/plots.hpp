#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "shearo/core/tensor.hpp"
#include "shearo/datamodel/datamodel.hpp"

namespace shearo::cli {

struct CurveSeries {
  std::string name;
  std::string color;  // css color
  std::vector<std::pair<double, double>> points;
};

/// Static SVG line plot on a unit-square axis box (ROC / PR curves).
void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<CurveSeries>& series, bool diagonal_reference);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  bool positive = false;  // defective samples draw red, defect-free green
};

/// Embedding scatter with two label colors.
void write_scatter_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<ScatterPoint>& points);

/// Heatmap overlay: grayscale phase image, red-weighted anomaly overlay,
/// ground-truth boxes green, detections blue.
void write_overlay_png(const std::filesystem::path& path, const Tensor& phase_hw,
                       const Tensor& heatmap_on_original_grid,
                       const std::vector<datamodel::BoundingBox>& ground_truth,
                       const std::vector<datamodel::BoundingBox>& detections);

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace shearo::cli
