#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace offnac {

/// Minimal standalone SVG line chart: axes with ticks, one polyline per
/// series, a legend, and an optional logarithmic y axis. Just enough to
/// plot seed-averaged learning curves without an external plotting stack.
class LineChart {
public:
    struct Series {
        std::string name;
        std::string color;
        std::vector<std::pair<double, double>> points;
    };

    LineChart(std::string title, std::string x_label, std::string y_label, bool log_y = false)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)),
          log_y_(log_y) {}

    void add_series(std::string name, std::vector<std::pair<double, double>> points) {
        static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                        "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
        Series s;
        s.name = std::move(name);
        s.color = palette[series_.size() % 8];
        s.points = std::move(points);
        series_.push_back(std::move(s));
    }

    std::string render() const {
        constexpr double width = 800, height = 500;
        constexpr double left = 70, right = 20, top = 40, bottom = 55;
        const double plot_w = width - left - right;
        const double plot_h = height - top - bottom;

        double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
        double y_min = x_min, y_max = -x_min;
        for (const auto& s : series_)
            for (const auto& [x, y] : s.points) {
                if (log_y_ && y <= 0.0) continue;
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        if (!(x_min <= x_max)) throw std::runtime_error("LineChart: no drawable points");
        if (x_min == x_max) x_max = x_min + 1.0;
        if (y_min == y_max) y_max = y_min + 1.0;
        const double ylo = log_y_ ? std::log10(y_min) : y_min;
        const double yhi = log_y_ ? std::log10(y_max) : y_max;

        auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
        auto sy = [&](double y) {
            const double v = log_y_ ? std::log10(y) : y;
            return top + plot_h - (v - ylo) / (yhi - ylo) * plot_h;
        };

        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\" "
            << "font-family=\"sans-serif\">" << title_ << "</text>\n";

        // axes
        out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
            << top + plot_h << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";

        constexpr int ticks = 5;
        for (int i = 0; i <= ticks; ++i) {
            const double fx = x_min + (x_max - x_min) * i / ticks;
            const double px = sx(fx);
            out << "<line x1=\"" << px << "\" y1=\"" << top + plot_h << "\" x2=\"" << px
                << "\" y2=\"" << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << px << "\" y=\"" << top + plot_h + 20
                << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
                << tick_label(fx) << "</text>\n";
            const double fv = ylo + (yhi - ylo) * i / ticks;
            const double fy = log_y_ ? std::pow(10.0, fv) : fv;
            const double py = top + plot_h - (fv - ylo) / (yhi - ylo) * plot_h;
            out << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left << "\" y2=\""
                << py << "\" stroke=\"black\"/>\n";
            out << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
                << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
                << tick_label(fy) << "</text>\n";
        }
        out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label_
            << "</text>\n";
        out << "<text x=\"16\" y=\"" << top + plot_h / 2
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
            << "transform=\"rotate(-90 16 " << top + plot_h / 2 << ")\">" << y_label_
            << (log_y_ ? " (log scale)" : "") << "</text>\n";

        for (const auto& s : series_) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (const auto& [x, y] : s.points) {
                if (log_y_ && y <= 0.0) continue;
                if (!first) out << ' ';
                out << sx(x) << ',' << sy(y);
                first = false;
            }
            out << "\"/>\n";
        }

        // legend, top-right corner of the plot area
        double ly = top + 14;
        for (const auto& s : series_) {
            const double lx = left + plot_w - 160;
            out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 24 << "\" y2=\""
                << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
            out << "<text x=\"" << lx + 30 << "\" y=\"" << ly
                << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.name << "</text>\n";
            ly += 18;
        }
        out << "</svg>\n";
        return out.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        out << render();
    }

private:
    static std::string tick_label(double v) {
        char buf[32];
        const double mag = std::abs(v);
        if (v == 0.0)
            std::snprintf(buf, sizeof(buf), "0");
        else if (mag >= 1e4 || mag < 1e-3)
            std::snprintf(buf, sizeof(buf), "%.1e", v);
        else
            std::snprintf(buf, sizeof(buf), "%.4g", v);
        return buf;
    }

    std::string title_, x_label_, y_label_;
    bool log_y_;
    std::vector<Series> series_;
};

} // namespace offnac
