#pragma once

#include <array>

#include "io.hpp"

namespace cmanifold {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace svg {

inline constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;

inline const std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string header(double w, double h, const std::string& title) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
        num(w, 0), num(h, 0), num(w / 2, 1), escape(title));
}

struct Range {
    double lo = 0, hi = 1;

    static Range of(double lo, double hi) {
        if (!(hi > lo)) {
            const double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.05;
            return {lo - pad, hi + pad};
        }
        return {lo, hi};
    }

    double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

inline std::string axes(const Range& xr, const Range& yr, const std::string& xlabel, const std::string& ylabel) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    std::string s = fmt::format("<g stroke=\"black\"><line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>"
                                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{3}\"/></g>\n",
                                num(x0, 1), num(y0, 1), num(x1, 1), num(y1, 1));
    for (int t = 0; t <= 4; ++t) {
        const double xv = xr.lo + (xr.hi - xr.lo) * t / 4, yv = yr.lo + (yr.hi - yr.lo) * t / 4;
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(xr.map(xv, x0, x1), 1), num(y0 + 18, 1),
                         num(xv, 2));
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(x0 - 6, 1), num(yr.map(yv, y0, y1) + 4, 1),
                         num(yv, 3));
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num((x0 + x1) / 2, 1), num(kHeight - 18, 1),
                     escape(xlabel));
    s += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                     num((y0 + y1) / 2, 1), escape(ylabel));
    return s;
}

}  // namespace svg

/// One polyline per series, shared axes, legend on the right.
inline std::string line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel) {
    require(!series.empty(), "plot: no series");
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : series) {
        require(!s.x.empty() && s.x.size() == s.y.size(), fmt::format("plot: series '{}' is empty or ragged", s.name));
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            require(std::isfinite(s.x[i]) && std::isfinite(s.y[i]), fmt::format("plot: series '{}' has non-finite data", s.name));
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    const auto xr = svg::Range::of(xlo, xhi), yr = svg::Range::of(ylo, yhi);
    std::string out = svg::header(svg::kWidth, svg::kHeight, title) + svg::axes(xr, yr, xlabel, ylabel);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = svg::kPalette[k % svg::kPalette.size()];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) pts += ' ';
            pts += num(xr.map(s.x[i], svg::kLeft, svg::kWidth - svg::kRight), 2) + "," +
                   num(yr.map(s.y[i], svg::kHeight - svg::kBottom, svg::kTop), 2);
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, pts);
        const double ly = svg::kTop + 18.0 * static_cast<double>(k);
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"3\" fill=\"{}\"/>"
                           "<text x=\"{}\" y=\"{}\">{}</text>\n",
                           num(svg::kWidth - svg::kRight + 12, 1), num(ly, 1), color, num(svg::kWidth - svg::kRight + 30, 1),
                           num(ly + 5, 1), svg::escape(s.name));
    }
    return out + "</svg>\n";
}

/// L x L grid of cells shaded from white (lo) to dark blue (hi).
inline std::string heatmap(const Matrix& m, const std::string& title, const std::vector<std::string>& labels = {}) {
    require(m.size() > 0, "plot: empty matrix");
    require(m.allFinite(), "plot: non-finite matrix entry");
    require(labels.empty() || labels.size() == static_cast<std::size_t>(m.rows()), "plot: label count mismatch");
    const double cell = std::max(4.0, 360.0 / static_cast<double>(std::max(m.rows(), m.cols())));
    const double w = svg::kLeft + cell * static_cast<double>(m.cols()) + 40, h = svg::kTop + cell * static_cast<double>(m.rows()) + 40;
    const double lo = m.minCoeff(), hi = m.maxCoeff();
    std::string out = svg::header(w, h, title);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double t = hi > lo ? (m(i, j) - lo) / (hi - lo) : 1.0;
            const int r = static_cast<int>(std::lround(255 - t * (255 - 8)));
            const int g = static_cast<int>(std::lround(255 - t * (255 - 48)));
            const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
            out += fmt::format("<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#{:02x}{:02x}{:02x}\"/>\n",
                               num(svg::kLeft + cell * static_cast<double>(j), 2), num(svg::kTop + cell * static_cast<double>(i), 2),
                               num(cell, 2), num(cell, 2), r, g, b);
        }
    for (std::size_t i = 0; i < labels.size(); ++i)
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{}</text>\n", num(svg::kLeft - 4, 1),
                           num(svg::kTop + cell * (static_cast<double>(i) + 0.5) + 3, 2), svg::escape(labels[i]));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">min {} max {}</text>\n", num(svg::kLeft, 1), num(h - 12, 1),
                       num(lo, 3), num(hi, 3));
    return out + "</svg>\n";
}

/// Fixed oblique projection of 3-D points; one colour per label.
inline std::string scatter3(const Matrix& pts, std::span<const int> labels, const std::string& title) {
    require(pts.rows() > 0 && pts.cols() == 3, "plot: scatter3 needs N x 3 points");
    require(labels.size() == static_cast<std::size_t>(pts.rows()), "plot: label count mismatch");
    require(pts.allFinite(), "plot: non-finite point");
    Matrix p2(pts.rows(), 2);
    p2.col(0) = pts.col(0) + 0.5 * pts.col(2);
    p2.col(1) = pts.col(1) + 0.35 * pts.col(2);
    const auto xr = svg::Range::of(p2.col(0).minCoeff(), p2.col(0).maxCoeff());
    const auto yr = svg::Range::of(p2.col(1).minCoeff(), p2.col(1).maxCoeff());
    std::string out = svg::header(svg::kWidth, svg::kHeight, title);
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
                           num(xr.map(p2(i, 0), svg::kLeft, svg::kWidth - svg::kRight), 2),
                           num(yr.map(p2(i, 1), svg::kHeight - svg::kBottom, svg::kTop), 2),
                           svg::kPalette[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]) % svg::kPalette.size()]);
    return out + "</svg>\n";
}

}  // namespace cmanifold
