#pragma once

#include <optional>
#include <string>
#include <vector>

namespace htr {

// One row per meta-training iteration. Optional fields render as empty CSV
// cells when the quantity was not measured that iteration.
struct MetricsRow {
    long iter = 0;
    long env_steps = 0;
    std::optional<double> avg_train_adaptation_return;
    std::optional<double> avg_test_adaptation_return;
    std::optional<double> mean_hindsight_task_distance;
    std::optional<double> hindsight_nonzero_reward_fraction;
    std::optional<double> real_nonzero_reward_fraction;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double kl_loss = 0.0;
    double wall_time = 0.0;  // seconds since run start; excluded from determinism checks
};

extern const char* kMetricsCsvHeader;

void export_csv(const std::vector<MetricsRow>& log, const std::string& path);
std::string metrics_to_csv(const std::vector<MetricsRow>& log);
std::vector<MetricsRow> parse_metrics_csv_text(const std::string& text);
std::vector<MetricsRow> parse_metrics_csv(const std::string& path);

// Drops the wall_time column; what the determinism checks compare.
std::string metrics_to_csv_without_wall_time(const std::vector<MetricsRow>& log);

}  // namespace htr
