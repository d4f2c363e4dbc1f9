// Minimal SVG line-chart writer for training curves and comparisons.
#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "microseg/common.hpp"

namespace microseg {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<PlotSeries>& series) {
    const int width = 860, height = 520;
    const int ml = 70, mr = 170, mt = 50, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
       << title << "</text>\n";

    for (int k = 0; k <= 5; ++k) {
        const double xv = xmin + k * (xmax - xmin) / 5.0;
        const double yv = ymin + k * (ymax - ymin) / 5.0;
        os << "<line x1=\"" << fmt_double(px(xv)) << "\" y1=\"" << mt << "\" x2=\""
           << fmt_double(px(xv)) << "\" y2=\"" << mt + ph
           << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << fmt_double(py(yv)) << "\" x2=\"" << ml + pw
           << "\" y2=\"" << fmt_double(py(yv)) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << fmt_double(px(xv)) << "\" y=\"" << mt + ph + 18
           << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_double(xv) << "</text>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << fmt_double(py(yv) + 4)
           << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_double(yv) << "</text>\n";
    }
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    os << "<text x=\"18\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
       << mt + ph / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = colors[si % 8];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << fmt_double(px(s.x[i])) << "," << fmt_double(py(s.y[i])) << " ";
        os << "\"/>\n";
        const int ly = mt + 16 + static_cast<int>(si) * 18;
        os << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
           << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<PlotSeries>& series) {
    std::ofstream f(path);
    require(f.good(), "cannot open plot file: " + path);
    f << render_line_chart(title, x_label, y_label, series);
}

} // namespace microseg
