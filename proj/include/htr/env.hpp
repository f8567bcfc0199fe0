#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace htr {

enum class EnvKind { point_robot, wheeled };
enum class RewardMode { sparse, dense };
enum class RolloutMode { prior, posterior };

// A goal point plus success radius; parameterizes the reward function.
struct TaskDescriptor {
    std::array<double, 2> goal{0.0, 0.0};
    double success_radius = 0.2;
};

// One environment step, tagged with the task id it was collected under.
struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
    int task_id = 0;
    int step_index = 0;
};

struct Trajectory {
    std::vector<Transition> transitions;
    int task_id = 0;
    RolloutMode rollout_mode = RolloutMode::prior;

    size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }
};

struct EnvSpec {
    EnvKind kind = EnvKind::point_robot;
    int horizon = 100;
    double goal_distance = 2.0;
    double success_radius = 0.2;
    RewardMode reward_mode = RewardMode::sparse;
    double control_cost_weight = 0.0;  // wheeled only
    double dt = 0.1;
};

// Sparse: -d + 1 inside the radius (strict inequality), else 0.
double sparse_reward(std::span<const double> next_state, const TaskDescriptor& task);

// Dense: negative L2 distance to the goal.
double dense_reward(std::span<const double> next_state, const TaskDescriptor& task);

// Goal = agent-position components of the state (first two, by convention).
TaskDescriptor state_to_task(std::span<const double> state, double success_radius);

// n goals i.i.d. uniform on the semicircle of the given radius.
std::vector<TaskDescriptor> sample_tasks(int n, double goal_distance,
                                         double success_radius, uint64_t rng_seed);

struct StepResult {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;
};

// Task-parameterized goal-reaching environment. The task is never part of
// the state. Not safe for concurrent stepping; run one instance per thread.
class Env {
  public:
    explicit Env(EnvSpec spec);

    void set_task(const TaskDescriptor& task, int task_id);
    const TaskDescriptor& task() const { return task_; }
    int task_id() const { return task_id_; }
    const EnvSpec& spec() const { return spec_; }

    std::vector<double> reset();
    StepResult step(std::span<const double> action);

    int state_dim() const { return spec_.kind == EnvKind::point_robot ? 2 : 4; }
    int action_dim() const { return 2; }
    int steps_taken() const { return steps_; }

  private:
    EnvSpec spec_;
    TaskDescriptor task_;
    int task_id_ = 0;
    std::vector<double> state_;
    int steps_ = 0;
    bool done_ = false;
};

}  // namespace htr
