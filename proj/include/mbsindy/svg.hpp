// Minimal self-contained SVG plotting for discovery diagnostics: coefficient
// charts with uncertainty bars, kernel density curves, boundary band
// overlays, and field error heat maps. No external plotting dependency.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "common.hpp"
#include "ensemble.hpp"
#include "replay.hpp"

namespace mbsindy {

namespace detail {

inline std::string svg_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

class SvgCanvas {
public:
    SvgCanvas(double width, double height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, const std::string& fill,
              double opacity = 1.0) {
        body_ += "<rect x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" width=\"" + svg_num(w) +
                 "\" height=\"" + svg_num(h) + "\" fill=\"" + fill + "\" fill-opacity=\"" +
                 svg_num(opacity) + "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0) {
        body_ += "<line x1=\"" + svg_num(x1) + "\" y1=\"" + svg_num(y1) + "\" x2=\"" + svg_num(x2) +
                 "\" y2=\"" + svg_num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
                 svg_num(stroke_width) + "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double stroke_width = 1.5, const std::string& fill = "none") {
        if (pts.size() < 2) return;
        std::string s = "<polyline points=\"";
        for (const auto& [x, y] : pts) s += svg_num(x) + "," + svg_num(y) + " ";
        s += "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             svg_num(stroke_width) + "\"/>\n";
        body_ += s;
    }

    void text(double x, double y, const std::string& s, double size = 11.0,
              const std::string& anchor = "middle", const std::string& fill = "#333") {
        body_ += "<text x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" font-size=\"" +
                 svg_num(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor +
                 "\" fill=\"" + fill + "\">" + escape(s) + "</text>\n";
    }

    std::string finish() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(width_) +
               "\" height=\"" + svg_num(height_) + "\" viewBox=\"0 0 " + svg_num(width_) + " " +
               svg_num(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
               body_ + "</svg>\n";
    }

private:
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else if (c == '&') out += "&amp;";
            else out += c;
        }
        return out;
    }

    double width_, height_;
    std::string body_;
};

// Linear map from a data interval to a pixel interval.
struct AxisMap {
    double d0 = 0.0, d1 = 1.0, p0 = 0.0, p1 = 1.0;
    double operator()(double v) const {
        const double span = d1 - d0;
        const double t = span == 0.0 ? 0.5 : (v - d0) / span;
        return p0 + t * (p1 - p0);
    }
};

}  // namespace detail

// Bar chart of aggregated coefficients with mean +- 3 sigma whiskers and
// inclusion probabilities printed above each bar.
inline std::string coefficient_chart_svg(const EnsembleResult& result) {
    const std::size_t n = result.features.size();
    const double margin_l = 60, margin_r = 20, margin_t = 30, margin_b = 70;
    const double plot_w = std::max<double>(60.0 * static_cast<double>(n), 300.0);
    const double plot_h = 300;
    detail::SvgCanvas svg(margin_l + plot_w + margin_r, margin_t + plot_h + margin_b);

    double lo = 0.0, hi = 0.0;
    for (const auto& s : result.features) {
        lo = std::min({lo, s.ci_lo, s.median});
        hi = std::max({hi, s.ci_hi, s.median});
    }
    if (hi == lo) hi = lo + 1.0;
    const double pad = 0.08 * (hi - lo);
    detail::AxisMap ymap{lo - pad, hi + pad, margin_t + plot_h, margin_t};

    const double y0 = ymap(0.0);
    svg.line(margin_l, y0, margin_l + plot_w, y0, "#888", 1.0);
    for (int g = 0; g <= 4; ++g) {
        const double v = (lo - pad) + (hi - lo + 2 * pad) * g / 4.0;
        const double y = ymap(v);
        svg.line(margin_l - 4, y, margin_l, y, "#333", 1.0);
        svg.text(margin_l - 8, y + 4, detail::fmt3(v), 10, "end");
    }

    const double slot = plot_w / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const FeatureStats& s = result.features[i];
        const double cx = margin_l + slot * (static_cast<double>(i) + 0.5);
        const double bar_w = slot * 0.5;
        const double yv = ymap(s.median);
        const std::string fill = s.retained ? "#2b6cb0" : "#cbd5e0";
        svg.rect(cx - bar_w / 2, std::min(yv, y0), bar_w, std::abs(yv - y0), fill, 0.9);
        if (s.presence > 0) {
            const double ylo = ymap(s.ci_lo), yhi = ymap(s.ci_hi);
            svg.line(cx, ylo, cx, yhi, "#c53030", 1.5);
            svg.line(cx - 6, ylo, cx + 6, ylo, "#c53030", 1.5);
            svg.line(cx - 6, yhi, cx + 6, yhi, "#c53030", 1.5);
        }
        char pbuf[32];
        std::snprintf(pbuf, sizeof(pbuf), "p=%.2f", s.inclusion_probability);
        svg.text(cx, margin_t - 8, pbuf, 10);
        svg.text(cx, margin_t + plot_h + 16, s.name, 10);
    }
    svg.text(margin_l + plot_w / 2, margin_t + plot_h + 40,
             "aggregated coefficients (bars: median, whiskers: mean +- 3 sigma)", 11);
    return svg.finish();
}

// Overlaid kernel density estimates, one polyline per named curve.
inline std::string kde_chart_svg(
    const std::vector<std::pair<std::string, KdeCurve>>& curves) {
    const double margin_l = 55, margin_r = 20, margin_t = 20, margin_b = 45;
    const double plot_w = 460, plot_h = 260;
    detail::SvgCanvas svg(margin_l + plot_w + margin_r, margin_t + plot_h + margin_b);
    if (curves.empty()) return svg.finish();

    double xlo = 0, xhi = 1, yhi = 0;
    bool first = true;
    for (const auto& [name, c] : curves) {
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            if (first) {
                xlo = xhi = c.x[i];
                first = false;
            }
            xlo = std::min(xlo, c.x[i]);
            xhi = std::max(xhi, c.x[i]);
            yhi = std::max(yhi, c.density[i]);
        }
    }
    if (xhi == xlo) xhi = xlo + 1.0;
    if (yhi == 0.0) yhi = 1.0;
    detail::AxisMap xmap{xlo, xhi, margin_l, margin_l + plot_w};
    detail::AxisMap ymap{0.0, 1.05 * yhi, margin_t + plot_h, margin_t};

    svg.line(margin_l, margin_t + plot_h, margin_l + plot_w, margin_t + plot_h, "#333", 1.0);
    svg.line(margin_l, margin_t, margin_l, margin_t + plot_h, "#333", 1.0);
    for (int g = 0; g <= 4; ++g) {
        const double v = xlo + (xhi - xlo) * g / 4.0;
        svg.text(xmap(v), margin_t + plot_h + 16, detail::fmt3(v), 10);
    }

    const std::vector<std::string> palette = {"#2b6cb0", "#c53030", "#2f855a", "#b7791f",
                                              "#6b46c1", "#319795"};
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const KdeCurve& c = curves[k].second;
        std::vector<std::pair<double, double>> pts;
        pts.reserve(c.x.size());
        for (std::size_t i = 0; i < c.x.size(); ++i)
            pts.emplace_back(xmap(c.x[i]), ymap(c.density[i]));
        const std::string& color = palette[k % palette.size()];
        svg.polyline(pts, color, 1.6);
        svg.text(margin_l + plot_w - 8, margin_t + 16 + 14 * static_cast<double>(k),
                 curves[k].first, 10, "end", color);
    }
    svg.text(margin_l + plot_w / 2, margin_t + plot_h + 34, "coefficient density", 11);
    return svg.finish();
}

// Boundary uncertainty band: recorded fronts in grey, the three replayed
// fronts (lower, nominal, upper coefficient) at the final time in color.
inline std::string band_chart_svg(const BoundaryBand& band,
                                  const std::vector<BoundaryCurve>& recorded) {
    const double margin = 40;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    auto grow = [&](const std::vector<Vec2>& pts) {
        for (const Vec2& p : pts) {
            xlo = std::min(xlo, p.x);
            xhi = std::max(xhi, p.x);
            ylo = std::min(ylo, p.y);
            yhi = std::max(yhi, p.y);
        }
    };
    for (const auto& c : recorded) grow(c.points);
    grow(band.lower.points);
    grow(band.median.points);
    grow(band.upper.points);
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;

    const double scale = 420.0 / std::max(xhi - xlo, yhi - ylo);
    const double plot_w = (xhi - xlo) * scale, plot_h = (yhi - ylo) * scale;
    detail::SvgCanvas svg(plot_w + 2 * margin, plot_h + 2 * margin + 20);
    detail::AxisMap xmap{xlo, xhi, margin, margin + plot_w};
    detail::AxisMap ymap{ylo, yhi, margin + plot_h, margin};

    auto draw = [&](const std::vector<Vec2>& pts, const std::string& color, double w) {
        std::vector<std::pair<double, double>> px;
        px.reserve(pts.size());
        for (const Vec2& p : pts) px.emplace_back(xmap(p.x), ymap(p.y));
        svg.polyline(px, color, w);
    };
    for (const auto& c : recorded) draw(c.points, "#cbd5e0", 1.0);
    draw(band.lower.points, "#c53030", 1.6);
    draw(band.upper.points, "#c53030", 1.6);
    draw(band.median.points, "#2b6cb0", 2.0);
    char label[96];
    std::snprintf(label, sizeof(label), "final front, mean +- 3 sigma band (area %.3g)",
                  band.area);
    svg.text(margin + plot_w / 2, margin + plot_h + margin / 2 + 10, label, 11);
    return svg.finish();
}

// Heat map of |replayed - recorded| at the comparison snapshot. Points are
// drawn as cells of size (dx, dy).
inline std::string field_error_svg(const FieldReplay& fr, double dx, double dy) {
    const double margin = 40;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const Vec2& p : fr.replayed.points) {
        xlo = std::min(xlo, p.x);
        xhi = std::max(xhi, p.x);
        ylo = std::min(ylo, p.y);
        yhi = std::max(yhi, p.y);
    }
    if (xhi <= xlo || yhi <= ylo) return detail::SvgCanvas(200, 100).finish();

    const double scale = 420.0 / std::max(xhi - xlo, yhi - ylo);
    const double plot_w = (xhi - xlo + dx) * scale, plot_h = (yhi - ylo + dy) * scale;
    detail::SvgCanvas svg(plot_w + 2 * margin, plot_h + 2 * margin + 20);

    const double emax = fr.max_abs_error;
    const double enorm = emax > 0 ? emax : 1.0;
    for (std::size_t i = 0; i < fr.abs_error.size(); ++i) {
        const Vec2& p = fr.replayed.points[i];
        const double t = fr.abs_error[i] / enorm;
        const int r = static_cast<int>(255 * t);
        const int b = static_cast<int>(255 * (1.0 - t));
        char color[16];
        std::snprintf(color, sizeof(color), "#%02x30%02x", r, b);
        svg.rect(margin + (p.x - xlo) * scale, margin + (yhi - p.y) * scale, dx * scale + 0.5,
                 dy * scale + 0.5, color, 0.9);
    }
    char label[96];
    std::snprintf(label, sizeof(label), "field replay |error|, max %.3g", emax);
    svg.text(margin + plot_w / 2, margin + plot_h + margin / 2 + 10, label, 11);
    return svg.finish();
}

}  // namespace mbsindy
