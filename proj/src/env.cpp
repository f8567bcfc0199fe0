#include "htr/env.hpp"

#include <cmath>
#include <stdexcept>

namespace htr {

namespace {
double dist_to_goal(std::span<const double> state, const TaskDescriptor& task) {
    const double dx = state[0] - task.goal[0];
    const double dy = state[1] - task.goal[1];
    return std::sqrt(dx * dx + dy * dy);
}
}  // namespace

double sparse_reward(std::span<const double> next_state, const TaskDescriptor& task) {
    const double d = dist_to_goal(next_state, task);
    return d < task.success_radius ? -d + 1.0 : 0.0;
}

double dense_reward(std::span<const double> next_state, const TaskDescriptor& task) {
    return -dist_to_goal(next_state, task);
}

TaskDescriptor state_to_task(std::span<const double> state, double success_radius) {
    return TaskDescriptor{{state[0], state[1]}, success_radius};
}

std::vector<TaskDescriptor> sample_tasks(int n, double goal_distance,
                                         double success_radius, uint64_t rng_seed) {
    if (n < 1) throw std::invalid_argument("sample_tasks: n must be >= 1");
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> angle(0.0, M_PI);
    std::vector<TaskDescriptor> tasks;
    tasks.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double theta = angle(rng);
        tasks.push_back(TaskDescriptor{
            {goal_distance * std::cos(theta), goal_distance * std::sin(theta)},
            success_radius});
    }
    return tasks;
}

Env::Env(EnvSpec spec) : spec_(spec) {
    if (spec_.horizon < 1) throw std::invalid_argument("Env: horizon must be >= 1");
    if (spec_.goal_distance <= spec_.success_radius)
        throw std::invalid_argument("Env: goal_distance must exceed success_radius");
    task_.success_radius = spec_.success_radius;
    state_.assign(state_dim(), 0.0);
    done_ = true;  // require reset() before step()
}

void Env::set_task(const TaskDescriptor& task, int task_id) {
    if (task.success_radius <= 0.0)
        throw std::invalid_argument("Env: success_radius must be positive");
    task_ = task;
    task_id_ = task_id;
}

std::vector<double> Env::reset() {
    state_.assign(state_dim(), 0.0);
    steps_ = 0;
    done_ = false;
    return state_;
}

StepResult Env::step(std::span<const double> action) {
    if (done_) throw std::logic_error("Env::step: episode already terminated");
    if (action.size() != static_cast<size_t>(action_dim()))
        throw std::invalid_argument("Env::step: action dim mismatch");
    for (double a : action)
        if (!std::isfinite(a)) throw std::invalid_argument("Env::step: non-finite action");

    std::array<double, 2> a{std::clamp(action[0], -1.0, 1.0),
                            std::clamp(action[1], -1.0, 1.0)};
    const double dt = spec_.dt;
    if (spec_.kind == EnvKind::point_robot) {
        state_[0] += a[0] * dt;
        state_[1] += a[1] * dt;
    } else {
        // Differential-drive kinematics: action = (v_cmd, omega_cmd).
        const double v = a[0];
        const double omega = a[1];
        const double phi = state_[2];
        state_[0] += v * std::cos(phi) * dt;
        state_[1] += v * std::sin(phi) * dt;
        state_[2] = phi + omega * dt;
        state_[3] = v;
    }

    double reward = spec_.reward_mode == RewardMode::sparse
                        ? sparse_reward(state_, task_)
                        : dense_reward(state_, task_);
    if (spec_.kind == EnvKind::wheeled)
        reward -= spec_.control_cost_weight * (a[0] * a[0] + a[1] * a[1]);

    steps_ += 1;
    done_ = steps_ >= spec_.horizon;  // fixed horizon, no early termination
    return {state_, reward, done_};
}

}  // namespace htr
