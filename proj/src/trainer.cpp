#include "htr/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace htr {

namespace {

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    // splitmix64 over (seed, stream)
    uint64_t x = seed + stream * 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Trajectory rollout_with(AgentNets& nets, Env& env, const std::vector<double>& z,
                        RolloutMode mode, std::mt19937_64& rng,
                        bool deterministic = false) {
    Trajectory traj;
    traj.task_id = env.task_id();
    traj.rollout_mode = mode;
    std::vector<double> state = env.reset();
    for (int step = 0;; ++step) {
        DiagGaussianHead head = nets.policy_head(state, z);
        SquashedSample a = sample_gaussian_tanh(head, rng);
        if (deterministic)
            for (size_t i = 0; i < a.action.size(); ++i) a.action[i] = std::tanh(head.mean[i]);
        StepResult res = env.step(a.action);
        Transition tr;
        tr.state = state;
        tr.action = a.action;
        tr.reward = res.reward;
        tr.next_state = res.next_state;
        tr.done = res.done;
        tr.task_id = env.task_id();
        tr.step_index = step;
        traj.transitions.push_back(std::move(tr));
        state = res.next_state;
        if (res.done) break;
    }
    return traj;
}

double sparse_return(const Trajectory& traj, const TaskDescriptor& task,
                     const EnvSpec& spec) {
    double total = 0.0;
    for (const auto& t : traj.transitions) {
        double r = sparse_reward(t.next_state, task);
        if (spec.kind == EnvKind::wheeled) {
            double c = 0.0;
            for (double a : t.action) c += a * a;
            r -= spec.control_cost_weight * c;
        }
        total += r;
    }
    return total;
}

}  // namespace

AdaptationResult meta_test(AgentNets& nets, ContextEncoder& encoder, EnvSpec spec,
                           const std::vector<TaskDescriptor>& tasks,
                           int episodes_per_task, uint64_t seed) {
    // Context rollouts keep the agent's training reward mode (a dense-reward
    // agent adapts from dense context); the reported return is always sparse.
    Env env(spec);
    std::mt19937_64 rng(seed);
    AdaptationResult out;
    out.per_episode_return.assign(episodes_per_task, 0.0);
    for (size_t i = 0; i < tasks.size(); ++i) {
        env.set_task(tasks[i], static_cast<int>(i));
        std::vector<Transition> context;
        for (int ep = 0; ep < episodes_per_task; ++ep) {
            LatentPosterior post = ep == 0 ? LatentPosterior::prior(encoder.latent_dim())
                                           : encoder.encode(context);
            std::vector<double> z = sample_z(post, rng);
            // First episode explores stochastically from the prior; later
            // episodes exploit the posterior with the policy mean.
            Trajectory traj = rollout_with(
                nets, env, z, ep == 0 ? RolloutMode::prior : RolloutMode::posterior, rng,
                /*deterministic=*/ep > 0);
            out.per_episode_return[ep] += sparse_return(traj, tasks[i], spec);
            for (auto& t : traj.transitions) context.push_back(std::move(t));
        }
    }
    for (double& v : out.per_episode_return) v /= static_cast<double>(tasks.size());
    return out;
}

std::vector<std::array<double, 2>> collect_prior_trajectories(
    AgentNets& nets, ContextEncoder& encoder, EnvSpec spec,
    const std::vector<TaskDescriptor>& tasks, int count, uint64_t seed) {
    spec.reward_mode = RewardMode::sparse;
    Env env(spec);
    std::mt19937_64 rng(seed);
    std::vector<std::array<double, 2>> points;
    for (int i = 0; i < count; ++i) {
        const TaskDescriptor& task = tasks[i % tasks.size()];
        env.set_task(task, i % static_cast<int>(tasks.size()));
        std::vector<double> z =
            sample_z(LatentPosterior::prior(encoder.latent_dim()), rng);
        Trajectory traj = rollout_with(nets, env, z, RolloutMode::prior, rng);
        for (const auto& t : traj.transitions)
            points.push_back({t.next_state[0], t.next_state[1]});
    }
    return points;
}

Trainer::Trainer(RunConfig cfg)
    : cfg_(std::move(cfg)),
      rng_(cfg_.seed),
      relabeler_(cfg_.relabel, cfg_.env.goal_distance, cfg_.env.success_radius,
                 cfg_.env.control_cost_weight) {
    validate_config(cfg_);
    if (cfg_.oracle_dense) cfg_.env.reward_mode = RewardMode::dense;
    train_tasks_ = sample_tasks(cfg_.n_train_tasks, cfg_.env.goal_distance,
                                cfg_.env.success_radius, derive_seed(cfg_.seed, 1));
    test_tasks_ = sample_tasks(cfg_.n_test_tasks, cfg_.env.goal_distance,
                               cfg_.env.success_radius, derive_seed(cfg_.seed, 2));
    Env probe(cfg_.env);
    std::mt19937_64 init_rng(derive_seed(cfg_.seed, 3));
    nets_ = AgentNets(probe.state_dim(), probe.action_dim(), cfg_.latent_dim,
                      cfg_.hidden, cfg_.sac, init_rng);
    encoder_ = ContextEncoder(probe.state_dim(), probe.action_dim(), cfg_.latent_dim,
                              cfg_.encoder_hidden, init_rng);
    buffers_.reserve(train_tasks_.size());
    for (size_t i = 0; i < train_tasks_.size(); ++i)
        buffers_.emplace_back(train_tasks_[i], static_cast<int>(i), cfg_.buffer_capacity);
}

Trajectory Trainer::rollout(Env& env, const std::vector<double>& z, RolloutMode mode) {
    return rollout_with(nets_, env, z, mode, rng_);
}

void Trainer::collect_task_data(size_t task_idx, Env& env, int episodes) {
    env.set_task(train_tasks_[task_idx], static_cast<int>(task_idx));
    std::vector<Transition> fresh_context;
    for (int ep = 0; ep < episodes; ++ep) {
        LatentPosterior post = ep == 0 ? LatentPosterior::prior(encoder_.latent_dim())
                                       : encoder_.encode(fresh_context);
        std::vector<double> z = sample_z(post, rng_);
        Trajectory traj =
            rollout(env, z, ep == 0 ? RolloutMode::prior : RolloutMode::posterior);
        env_steps_ += static_cast<long>(traj.size());
        for (const auto& t : traj.transitions) fresh_context.push_back(t);
        relabeler_.on_trajectory_collected(traj, rng_);
        buffers_[task_idx].add_trajectory(std::move(traj));
    }
}

void Trainer::collect_iteration() {
    Env env(cfg_.env);
    for (size_t i = 0; i < train_tasks_.size(); ++i)
        collect_task_data(i, env, cfg_.episodes_per_task_per_iter);
}

LossRecord Trainer::train_step() {
    // meta-batch: a random subset of training tasks (without replacement
    // when there are enough tasks).
    std::vector<size_t> idx(train_tasks_.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const size_t mb = std::min(static_cast<size_t>(cfg_.meta_batch), idx.size());
    for (size_t i = 0; i < mb; ++i) {
        std::uniform_int_distribution<size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng_)]);
    }

    for (ParamTensor* p : nets_.trainable()) p->zero_grad();
    for (ParamTensor* p : encoder_.net().params()) p->zero_grad();

    LossRecord losses;
    for (size_t k = 0; k < mb; ++k) {
        TaskBuffer& buffer = buffers_[idx[k]];
        TrainBatch tb = relabeler_.select_batches(
            buffer, cfg_.context_size, cfg_.batch_size, cfg_.recency_window,
            train_steps_done_, rng_);
        if (!tb.hindsight && cfg_.relabel.only_unsolved) {
            for (const auto& t : tb.rl)
                if (t.reward > 0.0) {
                    relabeler_.note_real_reward(tb.task_id);
                    break;
                }
        }

        // Critic + KL on one tape: encoder gradients flow through both the
        // reparameterized z and the KL term.
        Tape t;
        auto post = encoder_.encode_vars(t, tb.context.transitions);
        Tape::Var zvar = ContextEncoder::sample_z_var(t, post, rng_);
        Tape::Var closs = critic_loss(t, tb.rl, zvar, nets_, rng_);
        Tape::Var kl = ContextEncoder::kl_loss_var(t, post);
        Tape::Var total = t.add(closs, t.scale(kl, cfg_.kl_weight));
        t.backward(total);
        losses.critic += t.value(closs)(0, 0);
        losses.kl += t.value(kl)(0, 0);

        // Actor on its own tape with z detached.
        std::vector<double> zval = t.value(zvar).data;
        Tape t2;
        Tape::Var aloss = actor_loss(t2, tb.rl, zval, nets_, rng_);
        t2.backward(aloss);
        losses.actor += t2.value(aloss)(0, 0);
    }

    const AdamConfig adam{cfg_.lr};
    adam_step(nets_.actor.params(), adam);
    {
        auto c1 = nets_.critic1.params();
        auto c2 = nets_.critic2.params();
        adam_step(c1, adam);
        adam_step(c2, adam);
    }
    adam_step(encoder_.net().params(), adam);
    soft_update(nets_);
    train_steps_done_ += 1;

    const double inv = 1.0 / static_cast<double>(mb);
    losses.critic *= inv;
    losses.actor *= inv;
    losses.kl *= inv;
    return losses;
}

void Trainer::run(bool write_outputs) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    if (write_outputs) {
        fs::create_directories(cfg_.out_dir);
        std::ofstream cfg_out(fs::path(cfg_.out_dir) / "config.txt", std::ios::binary);
        cfg_out << serialize_config(cfg_);
    }

    auto eval_tasks = [this](const std::vector<TaskDescriptor>& tasks) {
        if (cfg_.eval_task_limit > 0 &&
            tasks.size() > static_cast<size_t>(cfg_.eval_task_limit))
            return std::vector<TaskDescriptor>(tasks.begin(),
                                               tasks.begin() + cfg_.eval_task_limit);
        return tasks;
    };

    for (int iter = 0; iter < cfg_.total_iters; ++iter) {
        collect_iteration();
        LossRecord sum;
        for (int s = 0; s < cfg_.train_steps_per_iter; ++s) {
            LossRecord l = train_step();
            sum.critic += l.critic;
            sum.actor += l.actor;
            sum.kl += l.kl;
        }
        const double inv = 1.0 / static_cast<double>(cfg_.train_steps_per_iter);

        MetricsRow row;
        row.iter = iter;
        row.env_steps = env_steps_;
        row.critic_loss = sum.critic * inv;
        row.actor_loss = sum.actor * inv;
        row.kl_loss = sum.kl * inv;
        auto snap = relabeler_.metrics().snapshot_and_reset();
        row.mean_hindsight_task_distance = snap.mean_hindsight_task_distance;
        row.hindsight_nonzero_reward_fraction = snap.hindsight_nonzero_reward_fraction;
        row.real_nonzero_reward_fraction = snap.real_nonzero_reward_fraction;

        if (iter % cfg_.eval_interval == 0 || iter == cfg_.total_iters - 1) {
            row.avg_train_adaptation_return =
                meta_test(nets_, encoder_, cfg_.env, eval_tasks(train_tasks_),
                          cfg_.eval_episodes_per_task, derive_seed(cfg_.seed, 100 + iter))
                    .mean();
            row.avg_test_adaptation_return =
                meta_test(nets_, encoder_, cfg_.env, eval_tasks(test_tasks_),
                          cfg_.eval_episodes_per_task, derive_seed(cfg_.seed, 200 + iter))
                    .mean();
        }
        row.wall_time = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        log_.push_back(row);

        if (write_outputs &&
            ((iter + 1) % cfg_.checkpoint_interval == 0 || iter == cfg_.total_iters - 1)) {
            save_checkpoint((fs::path(cfg_.out_dir) / "checkpoint.txt").string(), nets_,
                            encoder_);
            export_csv(log_, (fs::path(cfg_.out_dir) / "metrics.csv").string());
        }
    }
    if (write_outputs)
        export_csv(log_, (fs::path(cfg_.out_dir) / "metrics.csv").string());
}

}  // namespace htr
