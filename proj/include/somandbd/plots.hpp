#pragma once

#include <string>
#include <vector>

#include <somandbd/localize.hpp>

namespace soman {

// Minimal static plot emission: SVG line charts with error bars and SVG heat
// maps, plus the gridded CSV companions.  No external plotting dependencies.

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double err = 0.0;  // half-height of the error bar
};

std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<CurvePoint>& points);

// Row-major values, rows x cols; color scaled to [0, vmax] (vmax <= 0 uses the
// data maximum).
std::string svg_heatmap(const std::string& title, int rows, int cols,
                        const std::vector<double>& values, double vmax = -1.0);

// Fixed-beta delay-Doppler slices of a localization field: for each requested
// beta, the nearest grid plane is written as <prefix>_beta<k>.csv and .svg.
// Returns the number of files written.
int write_field_slices(const PolynomialField& field, const std::vector<double>& betas,
                       const std::string& prefix);

}  // namespace soman
