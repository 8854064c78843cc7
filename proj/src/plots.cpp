#include <somandbd/plots.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <somandbd/io.hpp>

namespace soman {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<CurvePoint>& points) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points.front().x;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y - p.err);
      ymax = std::max(ymax, p.y + p.err);
    }
    ymin = std::min(ymin, 0.0);
    ymax = std::max(ymax, 1.0);
    if (xmax == xmin) xmax = xmin + 1.0;
  }
  const double pw = kWidth - kMarginL - kMarginR, ph = kHeight - kMarginT - kMarginB;
  auto X = [&](double x) { return kMarginL + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return kMarginT + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16'>"
      << escape_xml(title) << "</text>\n";
  // axes
  svg << "<line x1='" << kMarginL << "' y1='" << kMarginT << "' x2='" << kMarginL << "' y2='"
      << kMarginT + ph << "' stroke='black'/>\n";
  svg << "<line x1='" << kMarginL << "' y1='" << kMarginT + ph << "' x2='" << kMarginL + pw
      << "' y2='" << kMarginT + ph << "' stroke='black'/>\n";
  svg << "<text x='" << kMarginL + pw / 2 << "' y='" << kHeight - 12
      << "' text-anchor='middle' font-size='12'>" << escape_xml(xlabel) << "</text>\n";
  svg << "<text x='16' y='" << kMarginT + ph / 2
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << kMarginT + ph / 2 << ")'>" << escape_xml(ylabel) << "</text>\n";
  // y ticks at 0, .25, .5, .75, 1
  for (int k = 0; k <= 4; ++k) {
    double yv = ymin + (ymax - ymin) * k / 4.0;
    svg << "<line x1='" << kMarginL - 4 << "' y1='" << Y(yv) << "' x2='" << kMarginL << "' y2='"
        << Y(yv) << "' stroke='black'/><text x='" << kMarginL - 8 << "' y='" << Y(yv) + 4
        << "' text-anchor='end' font-size='10'>" << fmt(yv) << "</text>\n";
  }
  // error bars and markers
  for (const auto& p : points) {
    if (p.err > 0)
      svg << "<line x1='" << X(p.x) << "' y1='" << Y(p.y - p.err) << "' x2='" << X(p.x)
          << "' y2='" << Y(p.y + p.err) << "' stroke='#888'/>\n";
    svg << "<circle cx='" << X(p.x) << "' cy='" << Y(p.y) << "' r='3' fill='#1f77b4'/>\n";
    svg << "<text x='" << X(p.x) << "' y='" << kMarginT + ph + 16
        << "' text-anchor='middle' font-size='10'>" << fmt(p.x) << "</text>\n";
  }
  // polyline
  if (points.size() > 1) {
    svg << "<polyline fill='none' stroke='#1f77b4' stroke-width='1.5' points='";
    for (const auto& p : points) svg << X(p.x) << "," << Y(p.y) << " ";
    svg << "'/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_heatmap(const std::string& title, int rows, int cols,
                        const std::vector<double>& values, double vmax) {
  if (vmax <= 0.0)
    for (double v : values) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;
  const double pw = kWidth - kMarginL - kMarginR, ph = kHeight - kMarginT - kMarginB;
  double cw = pw / cols, chh = ph / rows;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16'>"
      << escape_xml(title) << "</text>\n";
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double t = std::clamp(values[static_cast<std::size_t>(r) * cols + c] / vmax, 0.0, 1.0);
      // dark blue -> yellow ramp
      int red = static_cast<int>(255 * t);
      int green = static_cast<int>(220 * t + 20 * (1 - t));
      int blue = static_cast<int>(60 * t + 120 * (1 - t));
      svg << "<rect x='" << kMarginL + c * cw << "' y='" << kMarginT + (rows - 1 - r) * chh
          << "' width='" << cw + 0.5 << "' height='" << chh + 0.5 << "' fill='rgb(" << red << ","
          << green << "," << blue << ")'/>\n";
    }
  svg << "</svg>\n";
  return svg.str();
}

int write_field_slices(const PolynomialField& field, const std::vector<double>& betas,
                       const std::string& prefix) {
  int written = 0;
  for (std::size_t k = 0; k < betas.size(); ++k) {
    int g3 = static_cast<int>(std::lround(wrap01(betas[k]) * field.G_beta)) % field.G_beta;
    std::ostringstream csv;
    csv << "# tau rows x nu cols, beta = " << fmt(static_cast<double>(g3) / field.G_beta) << "\n";
    std::vector<double> slice(static_cast<std::size_t>(field.G_tau) * field.G_nu);
    for (int g1 = 0; g1 < field.G_tau; ++g1) {
      for (int g2 = 0; g2 < field.G_nu; ++g2) {
        double v = field.at(g1, g2, g3);
        slice[static_cast<std::size_t>(g1) * field.G_nu + g2] = v;
        csv << (g2 ? "," : "") << fmt(v);
      }
      csv << "\n";
    }
    std::string stem = prefix + "_beta" + std::to_string(k);
    write_text_file(stem + ".csv", csv.str());
    write_text_file(stem + ".svg",
                    svg_heatmap("field slice (beta index " + std::to_string(g3) + ")",
                                field.G_tau, field.G_nu, slice, -1.0));
    written += 2;
  }
  return written;
}

}  // namespace soman
