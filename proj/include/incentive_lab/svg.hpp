#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace incentive_lab::svg {

// Small fixed-layout charts. Data values are attached as data-* attributes
// so tests can read them back without parsing geometry.

inline constexpr double kWidth = 640, kHeight = 400;
inline constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
inline const std::vector<std::string> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

inline std::string num(double v, int prec = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

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

class Canvas {
   public:
    Canvas(std::string kind, const std::string& title) {
        body_ = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, 0) + "\" height=\"" +
                num(kHeight, 0) + "\" viewBox=\"0 0 " + num(kWidth, 0) + " " + num(kHeight, 0) +
                "\" data-chart=\"" + escape(kind) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        body_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        text(kWidth / 2, 22, title, "middle", 15);
    }

    void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 12,
              double rotate = 0) {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor +
                 "\" font-size=\"" + std::to_string(size) + "\"";
        if (rotate != 0)
            body_ += " transform=\"rotate(" + num(rotate, 0) + " " + num(x) + " " + num(y) + ")\"";
        body_ += ">" + escape(s) + "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#333",
              double width = 1) {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
                 num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width, 1) + "\"/>\n";
    }

    void raw(const std::string& s) { body_ += s; }

    /// Axes with `ticks` evenly spaced labels on each.
    void axes(double xmin, double xmax, double ymin, double ymax, const std::string& xlabel,
              const std::string& ylabel, int ticks = 5, int yprec = 0) {
        xmin_ = xmin, xmax_ = xmax, ymin_ = ymin, ymax_ = ymax;
        line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom);
        line(kLeft, kTop, kLeft, kHeight - kBottom);
        for (int i = 0; i <= ticks; ++i) {
            const double fx = xmin + (xmax - xmin) * i / ticks;
            const double fy = ymin + (ymax - ymin) * i / ticks;
            line(x(fx), kHeight - kBottom, x(fx), kHeight - kBottom + 4);
            text(x(fx), kHeight - kBottom + 18, num(fx, 0), "middle", 11);
            line(kLeft - 4, y(fy), kLeft, y(fy));
            text(kLeft - 7, y(fy) + 4, num(fy, yprec), "end", 11);
        }
        text((kLeft + kWidth - kRight) / 2, kHeight - 12, xlabel, "middle");
        text(16, (kTop + kHeight - kBottom) / 2, ylabel, "middle", 12, -90);
    }

    double x(double v) const { return kLeft + (v - xmin_) / (xmax_ - xmin_) * (kWidth - kLeft - kRight); }
    double y(double v) const {
        return kHeight - kBottom - (v - ymin_) / (ymax_ - ymin_) * (kHeight - kTop - kBottom);
    }

    void legend(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            const double ly = kTop + 8 + 18.0 * static_cast<double>(i);
            body_ += "<rect x=\"" + num(kWidth - kRight - 110) + "\" y=\"" + num(ly - 9) +
                     "\" width=\"12\" height=\"12\" fill=\"" + kPalette[i % kPalette.size()] + "\"/>\n";
            text(kWidth - kRight - 92, ly + 1, names[i]);
        }
    }

    std::string finish() const { return body_ + "</svg>\n"; }

   private:
    std::string body_;
    double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
};

inline double nice_ceiling(double v) {
    if (v <= 0) return 1;
    const double p = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (m * p >= v) return m * p;
    return 10 * p;
}

struct Series {
    std::string name;
    std::vector<double> values;
};

/// Bars of `counts` per series over bins of `width` starting at `lo`.
inline std::string histogram(const std::string& title, const std::string& xlabel,
                             const std::vector<Series>& counts, double lo, double width) {
    Canvas c("histogram", title);
    std::size_t bins = 0;
    double top = 0;
    for (const auto& s : counts) {
        bins = std::max(bins, s.values.size());
        for (double v : s.values) top = std::max(top, v);
    }
    const double hi = lo + width * static_cast<double>(bins);
    c.axes(lo, hi, 0, nice_ceiling(top), xlabel, "Count");
    const double slot = (c.x(lo + width) - c.x(lo)) / static_cast<double>(std::max<std::size_t>(1, counts.size()));
    for (std::size_t si = 0; si < counts.size(); ++si) {
        const auto& s = counts[si];
        for (std::size_t b = 0; b < s.values.size(); ++b) {
            const double x0 = c.x(lo + width * static_cast<double>(b)) + slot * static_cast<double>(si);
            c.raw("<rect x=\"" + num(x0) + "\" y=\"" + num(c.y(s.values[b])) + "\" width=\"" +
                  num(std::max(0.5, slot - 1)) + "\" height=\"" + num(c.y(0) - c.y(s.values[b])) +
                  "\" fill=\"" + kPalette[si % kPalette.size()] + "\" data-series=\"" + escape(s.name) +
                  "\" data-bin-start=\"" + num(lo + width * static_cast<double>(b), 2) +
                  "\" data-count=\"" + num(s.values[b], 0) + "\"/>\n");
        }
    }
    if (counts.size() > 1) {
        std::vector<std::string> names;
        for (const auto& s : counts) names.push_back(s.name);
        c.legend(names);
    }
    return c.finish();
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
}

/// Box plot per group: quartiles by linear interpolation, whiskers at the
/// most extreme values within 1.5 IQR.
inline std::string box_plot(const std::string& title, const std::string& ylabel,
                            const std::vector<Series>& groups, double ymax) {
    Canvas c("boxplot", title);
    c.axes(0, static_cast<double>(groups.size()), 0, ymax, "", ylabel, static_cast<int>(groups.size()));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& s = groups[g];
        if (s.values.empty()) continue;
        const double q1 = quantile(s.values, 0.25), med = quantile(s.values, 0.5), q3 = quantile(s.values, 0.75);
        const double iqr = q3 - q1;
        double lo = q1, hi = q3;
        for (double v : s.values) {
            if (v >= q1 - 1.5 * iqr) lo = std::min(lo, v);
            if (v <= q3 + 1.5 * iqr) hi = std::max(hi, v);
        }
        const double cx = c.x(static_cast<double>(g) + 0.5);
        const double half = 50;
        const std::string color = kPalette[g % kPalette.size()];
        c.raw("<g data-group=\"" + escape(s.name) + "\" data-n=\"" + std::to_string(s.values.size()) +
              "\" data-median=\"" + num(med, 1) + "\" data-q1=\"" + num(q1, 2) + "\" data-q3=\"" +
              num(q3, 2) + "\">\n");
        c.line(cx, c.y(lo), cx, c.y(q1), color);
        c.line(cx, c.y(q3), cx, c.y(hi), color);
        c.line(cx - half / 2, c.y(lo), cx + half / 2, c.y(lo), color);
        c.line(cx - half / 2, c.y(hi), cx + half / 2, c.y(hi), color);
        c.raw("<rect x=\"" + num(cx - half) + "\" y=\"" + num(c.y(q3)) + "\" width=\"" + num(2 * half) +
              "\" height=\"" + num(c.y(q1) - c.y(q3)) + "\" fill=\"" + color +
              "\" fill-opacity=\"0.25\" stroke=\"" + color + "\"/>\n");
        c.line(cx - half, c.y(med), cx + half, c.y(med), color, 2.5);
        c.raw("</g>\n");
        c.text(cx, kHeight - kBottom + 34, s.name, "middle");
    }
    return c.finish();
}

/// One polyline per series with points at x = 1..n.
inline std::string line_chart(const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, const std::vector<Series>& series, double ymax) {
    Canvas c("lines", title);
    std::size_t n = 0;
    for (const auto& s : series) n = std::max(n, s.values.size());
    c.axes(1, static_cast<double>(std::max<std::size_t>(n, 2)), 0, ymax, xlabel, ylabel, 5, 1);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string color = kPalette[si % kPalette.size()];
        std::string pts;
        for (std::size_t i = 0; i < s.values.size(); ++i)
            pts += (i ? " " : "") + num(c.x(static_cast<double>(i + 1))) + "," + num(c.y(s.values[i]));
        c.raw("<g data-series=\"" + escape(s.name) + "\">\n<polyline fill=\"none\" stroke=\"" + color +
              "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n");
        for (std::size_t i = 0; i < s.values.size(); ++i)
            c.raw("<circle cx=\"" + num(c.x(static_cast<double>(i + 1))) + "\" cy=\"" + num(c.y(s.values[i])) +
                  "\" r=\"2.5\" fill=\"" + color + "\" data-x=\"" + std::to_string(i + 1) + "\" data-y=\"" +
                  num(s.values[i], 4) + "\"/>\n");
        c.raw("</g>\n");
    }
    std::vector<std::string> names;
    for (const auto& s : series) names.push_back(s.name);
    c.legend(names);
    return c.finish();
}

}  // namespace incentive_lab::svg
