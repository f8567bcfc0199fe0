#include "htr/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace htr {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 56;

struct Series {
    std::string label;
    std::string color;
    std::vector<std::array<double, 2>> points;  // (x, y)
};

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<Series>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            xmin = std::min(xmin, p[0]);
            xmax = std::max(xmax, p[0]);
            ymin = std::min(ymin, p[1]);
            ymax = std::max(ymax, p[1]);
        }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    auto px = [&](double x) {
        return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin);
    };
    auto py = [&](double y) {
        return kHeight - kMargin - (y - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
       << "\" height=\"" << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
          "font-size=\"16\">" << title << "</text>\n";
    os << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
       << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
       << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
       << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    // axis extents
    os << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
       << "\" font-size=\"10\">" << xmin << "</text>\n";
    os << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
       << "\" text-anchor=\"end\" font-size=\"10\">" << xmax << "</text>\n";
    os << "<text x=\"" << kMargin - 6 << "\" y=\"" << kHeight - kMargin
       << "\" text-anchor=\"end\" font-size=\"10\">" << ymin << "</text>\n";
    os << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin
       << "\" text-anchor=\"end\" font-size=\"10\">" << ymax << "</text>\n";

    int legend_y = kMargin;
    for (const auto& s : series) {
        if (!s.points.empty()) {
            os << "<polyline fill=\"none\" stroke=\"" << s.color
               << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& p : s.points) os << px(p[0]) << ',' << py(p[1]) << ' ';
            os << "\"/>\n";
        }
        os << "<text x=\"" << kWidth - kMargin - 140 << "\" y=\"" << legend_y
           << "\" font-size=\"12\" fill=\"" << s.color << "\">" << s.label
           << "</text>\n";
        legend_y += 16;
    }
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_plots: cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("emit_plots: write failed for " + path.string());
}

Series pick(const std::vector<MetricsRow>& log, const std::string& label,
            const std::string& color,
            std::optional<double> MetricsRow::*field) {
    Series s{label, color, {}};
    for (const auto& r : log)
        if (r.*field)
            s.points.push_back({static_cast<double>(r.env_steps), *(r.*field)});
    return s;
}

}  // namespace

void emit_plots(const std::vector<MetricsRow>& log, const std::string& dir) {
    if (log.empty()) throw std::invalid_argument("emit_plots: empty metrics log");
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    write_file(fs::path(dir) / "adaptation_return.svg",
               svg_line_chart("Adaptation return", "env steps",
                              {pick(log, "train tasks", "#1f77b4",
                                    &MetricsRow::avg_train_adaptation_return),
                               pick(log, "test tasks", "#d62728",
                                    &MetricsRow::avg_test_adaptation_return)}));

    write_file(fs::path(dir) / "hindsight_distance.svg",
               svg_line_chart("Mean hindsight task distance", "env steps",
                              {pick(log, "hindsight distance", "#2ca02c",
                                    &MetricsRow::mean_hindsight_task_distance)}));

    write_file(fs::path(dir) / "reward_signal.svg",
               svg_line_chart("Nonzero-reward fraction per batch", "env steps",
                              {pick(log, "hindsight batches", "#9467bd",
                                    &MetricsRow::hindsight_nonzero_reward_fraction),
                               pick(log, "real batches", "#8c564b",
                                    &MetricsRow::real_nonzero_reward_fraction)}));
}

void emit_trajectory_scatter(const std::vector<std::array<double, 2>>& points,
                             const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    double extent = 1e-9;
    for (const auto& p : points)
        extent = std::max({extent, std::fabs(p[0]), std::fabs(p[1])});
    const int half = kHeight / 2;
    auto px = [&](double x) { return half + x / extent * (half - kMargin); };
    auto py = [&](double y) { return half - y / extent * (half - kMargin); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kHeight
       << "\" height=\"" << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << half << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << "Pre-adaptation trajectories</text>\n";
    for (const auto& p : points)
        os << "<circle cx=\"" << px(p[0]) << "\" cy=\"" << py(p[1])
           << "\" r=\"1\" fill=\"#1f77b4\" fill-opacity=\"0.25\"/>\n";
    os << "</svg>\n";
    write_file(fs::path(dir) / "prior_trajectories.svg", os.str());
}

}  // namespace htr
