#pragma once

#include <array>
#include <string>
#include <vector>

#include "htr/metrics.hpp"

namespace htr {

// Renders the run's metric curves as standalone SVG files under `dir`:
// adaptation_return.svg, hindsight_distance.svg, reward_signal.svg.
void emit_plots(const std::vector<MetricsRow>& log, const std::string& dir);

// Scatter of pre-adaptation rollout positions -> prior_trajectories.svg.
void emit_trajectory_scatter(const std::vector<std::array<double, 2>>& points,
                             const std::string& dir);

}  // namespace htr
