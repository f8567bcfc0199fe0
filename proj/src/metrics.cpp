#include "htr/metrics.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace htr {

const char* kMetricsCsvHeader =
    "iter,env_steps,avg_train_adaptation_return,avg_test_adaptation_return,"
    "mean_hindsight_task_distance,hindsight_nonzero_reward_fraction,"
    "real_nonzero_reward_fraction,critic_loss,actor_loss,kl_loss,wall_time";

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os.precision(17);
    os << *v;
    return os.str();
}

std::string cell(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::optional<double> parse_cell(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string row_to_csv(const MetricsRow& r, bool with_wall_time) {
    std::ostringstream os;
    os << r.iter << ',' << r.env_steps << ',' << cell(r.avg_train_adaptation_return)
       << ',' << cell(r.avg_test_adaptation_return) << ','
       << cell(r.mean_hindsight_task_distance) << ','
       << cell(r.hindsight_nonzero_reward_fraction) << ','
       << cell(r.real_nonzero_reward_fraction) << ',' << cell(r.critic_loss) << ','
       << cell(r.actor_loss) << ',' << cell(r.kl_loss);
    if (with_wall_time) os << ',' << cell(r.wall_time);
    return os.str();
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& log) {
    std::ostringstream os;
    os << kMetricsCsvHeader << '\n';
    for (const auto& r : log) os << row_to_csv(r, true) << '\n';
    return os.str();
}

std::string metrics_to_csv_without_wall_time(const std::vector<MetricsRow>& log) {
    std::ostringstream os;
    for (const auto& r : log) os << row_to_csv(r, false) << '\n';
    return os.str();
}

void export_csv(const std::vector<MetricsRow>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_csv: cannot write " + path);
    out << metrics_to_csv(log);
    if (!out) throw std::runtime_error("export_csv: write failed for " + path);
}

std::vector<MetricsRow> parse_metrics_csv_text(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("metrics csv: empty file");
    std::string header = line;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != kMetricsCsvHeader)
        throw std::runtime_error("metrics csv: unexpected header");
    std::vector<MetricsRow> out;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 11) throw std::runtime_error("metrics csv: malformed row");
        MetricsRow r;
        r.iter = std::stol(cells[0]);
        r.env_steps = std::stol(cells[1]);
        r.avg_train_adaptation_return = parse_cell(cells[2]);
        r.avg_test_adaptation_return = parse_cell(cells[3]);
        r.mean_hindsight_task_distance = parse_cell(cells[4]);
        r.hindsight_nonzero_reward_fraction = parse_cell(cells[5]);
        r.real_nonzero_reward_fraction = parse_cell(cells[6]);
        r.critic_loss = std::stod(cells[7]);
        r.actor_loss = std::stod(cells[8]);
        r.kl_loss = std::stod(cells[9]);
        r.wall_time = std::stod(cells[10]);
        out.push_back(r);
    }
    return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("metrics csv: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_metrics_csv_text(ss.str());
}

}  // namespace htr
