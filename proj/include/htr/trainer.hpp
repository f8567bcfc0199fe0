#pragma once

#include "htr/checkpoint.hpp"
#include "htr/config.hpp"
#include "htr/metrics.hpp"

namespace htr {

struct LossRecord {
    double critic = 0.0;
    double actor = 0.0;
    double kl = 0.0;
};

struct AdaptationResult {
    // Mean sparse return per adaptation episode index, averaged over tasks.
    std::vector<double> per_episode_return;

    double mean() const {
        if (per_episode_return.empty()) return 0.0;
        double s = 0.0;
        for (double v : per_episode_return) s += v;
        return s / static_cast<double>(per_episode_return.size());
    }
};

// Meta-test protocol: per task, fresh empty context; first episode with
// z ~ prior, then the posterior is re-encoded from all context gathered so
// far. Sparse return only; never mutates parameters or training buffers.
AdaptationResult meta_test(AgentNets& nets, ContextEncoder& encoder, EnvSpec spec,
                           const std::vector<TaskDescriptor>& tasks,
                           int episodes_per_task, uint64_t seed);

// 2D positions of prior-conditioned rollouts (the pre-adaptation scatter).
std::vector<std::array<double, 2>> collect_prior_trajectories(
    AgentNets& nets, ContextEncoder& encoder, EnvSpec spec,
    const std::vector<TaskDescriptor>& tasks, int count, uint64_t seed);

// Single-threaded deterministic meta-training loop.
class Trainer {
  public:
    explicit Trainer(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    AgentNets& nets() { return nets_; }
    ContextEncoder& encoder() { return encoder_; }
    Relabeler& relabeler() { return relabeler_; }
    std::vector<TaskBuffer>& buffers() { return buffers_; }
    const std::vector<TaskDescriptor>& train_tasks() const { return train_tasks_; }
    const std::vector<TaskDescriptor>& test_tasks() const { return test_tasks_; }
    const std::vector<MetricsRow>& log() const { return log_; }
    long env_steps() const { return env_steps_; }

    // Full run: collect/train loop, metrics row per iteration, CSV and
    // checkpoints under cfg.out_dir (unless write_outputs is false).
    void run(bool write_outputs = true);

    // Building blocks, exposed for tests and the acceptance suite.
    void collect_iteration();
    LossRecord train_step();

  private:
    Trajectory rollout(Env& env, const std::vector<double>& z, RolloutMode mode);
    void collect_task_data(size_t task_idx, Env& env, int episodes);

    RunConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<TaskDescriptor> train_tasks_;
    std::vector<TaskDescriptor> test_tasks_;
    AgentNets nets_;
    ContextEncoder encoder_;
    std::vector<TaskBuffer> buffers_;
    Relabeler relabeler_;
    std::vector<MetricsRow> log_;
    long env_steps_ = 0;
    long train_steps_done_ = 0;
};

}  // namespace htr
