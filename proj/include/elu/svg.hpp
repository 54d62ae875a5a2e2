#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace elu::svg {

struct Series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace detail

/// Minimal deterministic line plot; byte-stable for fixed inputs.
inline std::string line_plot(const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, const std::vector<Series>& series) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    const double W = 640, H = 420, ml = 64, mr = 150, mt = 40, mb = 48;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (!(xmin <= xmax)) { xmin = 0; xmax = 1; }
    if (!(ymin <= ymax)) { ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto Y = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
    out += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + title +
           "</text>\n";
    // axes
    out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(mt + ph) + "\" x2=\"" +
           detail::fmt(ml + pw) + "\" y2=\"" + detail::fmt(mt + ph) +
           "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(mt) + "\" x2=\"" +
           detail::fmt(ml) + "\" y2=\"" + detail::fmt(mt + ph) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        out += "<text x=\"" + detail::fmt(X(fx)) + "\" y=\"" + detail::fmt(mt + ph + 16) +
               "\" text-anchor=\"middle\">" + detail::fmt_tick(fx) + "</text>\n";
        out += "<text x=\"" + detail::fmt(ml - 6) + "\" y=\"" + detail::fmt(Y(fy) + 4) +
               "\" text-anchor=\"end\">" + detail::fmt_tick(fy) + "</text>\n";
    }
    out += "<text x=\"" + detail::fmt(ml + pw / 2) + "\" y=\"" + detail::fmt(H - 8) +
           "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
    out += "<text x=\"16\" y=\"" + detail::fmt(mt + ph / 2) + "\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 16 " + detail::fmt(mt + ph / 2) + ")\">" + ylabel +
           "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % 8];
        std::string pts;
        for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
            if (!pts.empty()) pts += " ";
            pts += detail::fmt(X(series[s].xs[i])) + "," + detail::fmt(Y(series[s].ys[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        for (std::size_t i = 0; i < series[s].xs.size(); ++i)
            out += "<circle cx=\"" + detail::fmt(X(series[s].xs[i])) + "\" cy=\"" +
                   detail::fmt(Y(series[s].ys[i])) + "\" r=\"2.5\" fill='" + color + "'/>\n";
        const double ly = mt + 14 + 16 * static_cast<double>(s);
        out += "<line x1=\"" + detail::fmt(ml + pw + 10) + "\" y1=\"" + detail::fmt(ly - 4) +
               "\" x2=\"" + detail::fmt(ml + pw + 30) + "\" y2=\"" + detail::fmt(ly - 4) +
               "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + detail::fmt(ml + pw + 34) + "\" y=\"" + detail::fmt(ly) + "\">" +
               series[s].label + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace elu::svg
