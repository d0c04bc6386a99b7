#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace cst::cli {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series) {
  const double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << std::setprecision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fy = y0 + (y1 - y0) * t / 4, fx = x0 + (x1 - x0) * t / 4;
    o << "<text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << fy
      << "</text>\n";
    o << "<text x=\"" << px(fx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
      << fx << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.points) o << px(x) << ',' << py(y) << ' ';
    o << "\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << W - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 32
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - right + 38 << "\" y=\"" << ly + 4 << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string mask_panels(const std::vector<MaskPanel>& panels) {
  const double cell = 6, gap = 16, label = 140;
  std::size_t maxw = 1, maxh = 1;
  for (const auto& p : panels) {
    maxw = std::max(maxw, p.width);
    maxh = std::max(maxh, p.height);
  }
  const double row_h = static_cast<double>(maxh) * cell + gap;
  const double W = label + 2 * (static_cast<double>(maxw) * cell + gap);
  const double H = 30 + row_h * static_cast<double>(panels.size());
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << label << "\" y=\"18\">ground truth</text>\n";
  o << "<text x=\"" << label + static_cast<double>(maxw) * cell + gap << "\" y=\"18\">predicted</text>\n";
  for (std::size_t r = 0; r < panels.size(); ++r) {
    const auto& p = panels[r];
    const double y = 30 + row_h * static_cast<double>(r);
    o << "<text x=\"4\" y=\"" << y + 12 << "\">" << escape(p.name) << "</text>\n";
    for (int side = 0; side < 2; ++side) {
      const auto& bits = side == 0 ? p.truth : p.predicted;
      const double x = label + side * (static_cast<double>(maxw) * cell + gap);
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << p.width * cell << "\" height=\""
        << p.height * cell << "\" fill=\"#222\"/>\n";
      for (std::size_t i = 0; i < bits.size() && i < p.height * p.width; ++i) {
        if (!bits[i]) continue;
        o << "<rect x=\"" << x + static_cast<double>(i % p.width) * cell << "\" y=\""
          << y + static_cast<double>(i / p.width) * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"#f5d442\"/>\n";
      }
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace cst::cli
