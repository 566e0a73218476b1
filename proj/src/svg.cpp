#include "carl/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace carl::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 360.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
                                "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"};

std::string escape(const std::string& s) {
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

std::string header(const std::string& title) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
        kWidth, kHeight, kWidth / 2, escape(title));
}

double nice_max(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) return 1.0;
    const double mag = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (m * mag >= v) return m * mag;
    }
    return 10.0 * mag;
}

std::string y_axis(double lo, double hi) {
    std::string out;
    const double plot_h = kHeight - kTop - kBottom;
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        const double y = kHeight - kBottom - plot_h * i / 4.0;
        out += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", kLeft, y,
                           kWidth - kRight, y);
        out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", kLeft - 5, y + 4, v);
    }
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                       kHeight - kBottom);
    return out;
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
    std::string out = header(title);
    double hi = 0.0;
    for (double v : values) hi = std::max(hi, finite_or_zero(v));
    hi = nice_max(hi);
    out += y_axis(0.0, hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double slot = labels.empty() ? plot_w : plot_w / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size() && i < values.size(); ++i) {
        const double h = plot_h * finite_or_zero(values[i]) / hi;
        const double x = kLeft + slot * i + slot * 0.15;
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n", x,
                           kHeight - kBottom - h, slot * 0.7, h, kPalette[i % 10]);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.4g}</text>\n", x + slot * 0.35,
                           kHeight - kBottom - h - 4, values[i]);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", x + slot * 0.35,
                           kHeight - kBottom + 16, escape(labels[i]));
    }
    return out + "</svg>\n";
}

std::string grouped_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                              const std::vector<std::string>& groups,
                              const std::vector<std::array<double, 3>>& values) {
    std::string out = header(title);
    double hi = 0.0;
    for (const auto& row : values) {
        for (double v : row) hi = std::max(hi, finite_or_zero(v));
    }
    hi = nice_max(hi);
    out += y_axis(0.0, hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double slot = labels.empty() ? plot_w : plot_w / static_cast<double>(labels.size());
    const double bar = slot * 0.8 / 3.0;
    for (std::size_t i = 0; i < labels.size() && i < values.size(); ++i) {
        for (std::size_t g = 0; g < 3; ++g) {
            const double h = plot_h * finite_or_zero(values[i][g]) / hi;
            const double x = kLeft + slot * i + slot * 0.1 + bar * g;
            out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n", x,
                               kHeight - kBottom - h, bar, h, kPalette[g]);
        }
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + slot * (i + 0.5),
                           kHeight - kBottom + 16, escape(labels[i]));
    }
    for (std::size_t g = 0; g < groups.size() && g < 3; ++g) {
        const double x = kLeft + 10 + 90.0 * g;
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", x,
                           kHeight - 22, kPalette[g]);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{}\">{}</text>\n", x + 14, kHeight - 13, escape(groups[g]));
    }
    return out + "</svg>\n";
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
    std::string out = header(title);
    double x_lo = 0.0, x_hi = 1.0, y_hi = 0.0;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                x_lo = x_hi = s.x[i];
                first = false;
            }
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            if (i < s.y.size()) y_hi = std::max(y_hi, finite_or_zero(s.y[i]));
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    y_hi = nice_max(y_hi);
    out += y_axis(0.0, y_hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_w / 2,
                       kHeight - kBottom + 18, escape(x_label));
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            const double x = kLeft + plot_w * (s.x[i] - x_lo) / (x_hi - x_lo);
            const double y = kHeight - kBottom - plot_h * finite_or_zero(s.y[i]) / y_hi;
            pts += fmt::format("{}{:.1f},{:.1f}", pts.empty() ? "" : " ", x, y);
        }
        out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts,
                           kPalette[k % 10]);
        const double lx = kLeft + 10 + 80.0 * static_cast<double>(k % 7);
        const double ly = kHeight - 22 + 12.0 * static_cast<double>(k / 7);
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"3\" fill=\"{}\"/>\n", lx, ly,
                           kPalette[k % 10]);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", lx + 14, ly + 4, escape(s.name));
    }
    return out + "</svg>\n";
}

}  // namespace carl::svg
