#pragma once

// Minimal SVG line charts for the run outputs. Two stacked panels: defect
// against n on a log10 axis, then the ledger residual against n.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dpe/io.hpp"

namespace dpe::runner {

struct Panel {
    std::string title;
    std::vector<double> y;
    bool log_scale = false;
};

namespace detail {

inline std::string polyline(const Panel& p, double x0, double y0, double w, double h) {
    std::vector<double> ys;
    for (double v : p.y) ys.push_back(p.log_scale ? std::log10(std::max(std::abs(v), 1e-300)) : v);
    double lo = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
    double hi = ys.empty() ? 1.0 : *std::max_element(ys.begin(), ys.end());
    if (hi - lo < 1e-300) {
        lo -= 1.0;
        hi += 1.0;
    }
    std::ostringstream os;
    os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
    os << "<text x=\"" << x0 << "\" y=\"" << y0 - 6 << "\" font-size=\"12\">" << p.title << " (min "
       << io::format_double(p.log_scale ? std::pow(10.0, lo) : lo) << ", max "
       << io::format_double(p.log_scale ? std::pow(10.0, hi) : hi) << ")</text>\n";
    os << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    const double nx = std::max<double>(1.0, static_cast<double>(ys.size()) - 1.0);
    for (std::size_t k = 0; k < ys.size(); ++k) {
        const double px = x0 + w * static_cast<double>(k) / nx;
        const double py = y0 + h - h * (ys[k] - lo) / (hi - lo);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f ", px, py);
        os << buf;
    }
    os << "\"/>\n";
    return os.str();
}

} // namespace detail

inline std::string render_svg(const std::vector<Panel>& panels) {
    const double w = 520, h = 180, margin = 40;
    const double total_h = margin + static_cast<double>(panels.size()) * (h + margin);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * margin << "\" height=\"" << total_h
       << "\">\n";
    double y = margin;
    for (const auto& p : panels) {
        os << detail::polyline(p, margin, y, w, h);
        y += h + margin;
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace dpe::runner
