#pragma once

#include <optional>
#include <set>

#include "htr/buffer.hpp"

namespace htr {

enum class RelabelStrategy { SER, EC };

struct RelabelConfig {
    bool enabled = true;
    double K = 0.1;  // probability a training batch is hindsight-relabelled
    RelabelStrategy strategy = RelabelStrategy::SER;
    bool anneal = false;
    long anneal_steps = 0;  // linear K -> 0 over this many train steps
    bool only_unsolved = false;
    int grid_angle_bins = 12;
    int grid_radius_bins = 8;
    double ec_explore_fraction = 0.5;
};

// Task ids below this are real training tasks; hindsight ids start here.
constexpr int kHindsightIdBase = 1'000'000;

// Reward rewriting: keep (s, a, s', done), recompute the sparse reward under
// the hindsight task and retag the task id. The control penalty for the
// wheeled environment is re-applied from the stored (clipped) action.
inline Transition relabel_transition(const Transition& t, const TaskDescriptor& task,
                                     int hindsight_task_id,
                                     double control_cost_weight = 0.0) {
    Transition out = t;
    out.reward = sparse_reward(t.next_state, task);
    if (control_cost_weight != 0.0) {
        double c = 0.0;
        for (double a : t.action) c += a * a;
        out.reward -= control_cost_weight * c;
    }
    out.task_id = hindsight_task_id;
    return out;
}

// One hindsight task per trajectory: the episode's final state, HER-style.
// (Uniform over visited states biases goals toward where the policy lingers
// and collapses the curriculum; the endpoint pushes it outward.)
inline TaskDescriptor select_hindsight_task(const Trajectory& traj,
                                            double success_radius,
                                            std::mt19937_64& /*rng*/) {
    if (traj.empty())
        throw std::invalid_argument("select_hindsight_task: empty trajectory");
    return state_to_task(traj.transitions.back().next_state, success_radius);
}

struct HindsightBatch {
    ContextBatch context;
    std::vector<Transition> rl;
    TaskDescriptor task;
    int task_id = 0;
};

namespace detail {
// n draws from one episode under one hindsight task; without replacement
// when the episode is long enough, with replacement otherwise.
inline std::vector<Transition> draw_relabelled(const Trajectory& ep, size_t n,
                                               const TaskDescriptor& task, int task_id,
                                               double ccw, std::mt19937_64& rng) {
    std::vector<Transition> out;
    out.reserve(n);
    if (ep.size() > n) {
        std::vector<size_t> idx(ep.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (size_t i = 0; i < n; ++i) {
            std::uniform_int_distribution<size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
            out.push_back(relabel_transition(ep.transitions[idx[i]], task, task_id, ccw));
        }
    } else {
        std::uniform_int_distribution<size_t> pick(0, ep.size() - 1);
        for (size_t i = 0; i < n; ++i)
            out.push_back(relabel_transition(ep.transitions[pick(rng)], task, task_id, ccw));
    }
    return out;
}
}  // namespace detail

// Single Episode Relabeling: one episode supplies the hindsight task, the
// context batch and the RL batch, all relabelled under that one task.
inline HindsightBatch ser_sample(const TaskBuffer& buffer, size_t m, size_t n,
                                 double success_radius, double control_cost_weight,
                                 int hindsight_task_id, std::mt19937_64& rng) {
    if (buffer.empty()) throw std::logic_error("ser_sample: empty buffer");
    const Trajectory& ep = buffer.sample_episode(rng);
    HindsightBatch out;
    out.task = select_hindsight_task(ep, success_radius, rng);
    out.task_id = hindsight_task_id;
    out.context.source = BatchSource::hindsight;
    out.context.transitions = detail::draw_relabelled(ep, m, out.task, out.task_id,
                                                      control_cost_weight, rng);
    out.rl = detail::draw_relabelled(ep, n, out.task, out.task_id,
                                     control_cost_weight, rng);
    return out;
}

// Episode Clustering: eager relabelling into discretized hindsight buffers
// on a polar grid over the reachable disc.
class EpisodeClusters {
  public:
    struct Cluster {
        int angle_bin = 0;
        int radius_bin = 0;
        TaskDescriptor representative_task;
        std::deque<Trajectory> episodes;
        size_t total_transitions = 0;
        size_t exploration_episodes = 0;
        size_t exploitation_episodes = 0;
    };

    EpisodeClusters(int angle_bins, int radius_bins, double goal_distance,
                    double success_radius, double control_cost_weight,
                    size_t capacity_per_cluster = 100'000)
        : angle_bins_(angle_bins),
          radius_bins_(radius_bins),
          goal_distance_(goal_distance),
          success_radius_(success_radius),
          ccw_(control_cost_weight),
          capacity_(capacity_per_cluster) {
        if (angle_bins < 1 || radius_bins < 1)
            throw std::invalid_argument("EpisodeClusters: bins must be >= 1");
        clusters_.resize(static_cast<size_t>(angle_bins) * radius_bins);
        for (int a = 0; a < angle_bins; ++a)
            for (int r = 0; r < radius_bins; ++r) {
                Cluster& c = clusters_[index(a, r)];
                c.angle_bin = a;
                c.radius_bin = r;
                c.representative_task = bin_center(a, r);
            }
    }

    int task_id_of(int a, int r) const { return kHindsightIdBase + index(a, r); }

    // Goals outside the grid extent clamp to the boundary bin.
    std::pair<int, int> bin_of(const std::array<double, 2>& goal) const {
        double angle = std::atan2(goal[1], goal[0]);
        angle = std::clamp(angle, 0.0, M_PI);
        const double radius = std::clamp(std::hypot(goal[0], goal[1]), 0.0, goal_distance_);
        int a = std::min(static_cast<int>(angle / M_PI * angle_bins_), angle_bins_ - 1);
        int r = std::min(static_cast<int>(radius / goal_distance_ * radius_bins_),
                         radius_bins_ - 1);
        return {a, r};
    }

    TaskDescriptor bin_center(int a, int r) const {
        const double angle = (a + 0.5) * M_PI / angle_bins_;
        const double radius = (r + 0.5) * goal_distance_ / radius_bins_;
        return TaskDescriptor{{radius * std::cos(angle), radius * std::sin(angle)},
                              success_radius_};
    }

    // Relabel the whole trajectory under the cluster's representative task
    // and file it there, tagged exploration/exploitation by rollout mode.
    void ingest(const Trajectory& traj, std::mt19937_64& rng) {
        if (traj.empty()) throw std::invalid_argument("ec_ingest: empty trajectory");
        const TaskDescriptor picked = select_hindsight_task(traj, success_radius_, rng);
        auto [a, r] = bin_of(picked.goal);
        Cluster& c = clusters_[index(a, r)];
        Trajectory relabelled;
        relabelled.rollout_mode = traj.rollout_mode;
        relabelled.task_id = task_id_of(a, r);
        for (const Transition& t : traj.transitions)
            relabelled.transitions.push_back(relabel_transition(
                t, c.representative_task, relabelled.task_id, ccw_));
        if (traj.rollout_mode == RolloutMode::prior)
            c.exploration_episodes += 1;
        else
            c.exploitation_episodes += 1;
        c.total_transitions += relabelled.size();
        c.episodes.push_back(std::move(relabelled));
        while (c.total_transitions > capacity_ && c.episodes.size() > 1) {
            c.total_transitions -= c.episodes.front().size();
            c.episodes.pop_front();
        }
    }

    bool any_nonempty() const {
        for (const auto& c : clusters_)
            if (c.total_transitions > 0) return true;
        return false;
    }

    // Context = m recent transitions, RL batch = n transitions balancing
    // exploration vs exploitation draws by explore_fraction.
    HindsightBatch sample(size_t m, size_t n, double explore_fraction,
                          std::mt19937_64& rng) const {
        // Stratified by radius shell: a uniform pick over all nonempty
        // clusters would swamp training with the densely-populated inner
        // shells; picking the shell first keeps the far tasks in play.
        std::vector<std::vector<const Cluster*>> shells(radius_bins_);
        bool any = false;
        for (const auto& c : clusters_)
            if (c.total_transitions > 0) {
                shells[c.radius_bin].push_back(&c);
                any = true;
            }
        if (!any) throw std::logic_error("ec_sample: all clusters empty");
        std::vector<const std::vector<const Cluster*>*> nonempty_shells;
        for (const auto& s : shells)
            if (!s.empty()) nonempty_shells.push_back(&s);
        std::uniform_int_distribution<size_t> pick_shell(0, nonempty_shells.size() - 1);
        const auto& shell = *nonempty_shells[pick_shell(rng)];
        std::uniform_int_distribution<size_t> pick(0, shell.size() - 1);
        const Cluster& c = *shell[pick(rng)];

        HindsightBatch out;
        out.task = c.representative_task;
        out.task_id = task_id_of(c.angle_bin, c.radius_bin);
        out.context.source = BatchSource::hindsight;

        // recent transitions for context
        std::vector<const Transition*> flat;
        for (const auto& ep : c.episodes)
            for (const auto& t : ep.transitions) flat.push_back(&t);
        const size_t take = std::min(m, flat.size());
        for (size_t i = flat.size() - take; i < flat.size(); ++i)
            out.context.transitions.push_back(*flat[i]);
        while (out.context.transitions.size() < m) {  // pad short buffers
            std::uniform_int_distribution<size_t> p2(0, flat.size() - 1);
            out.context.transitions.push_back(*flat[p2(rng)]);
        }

        // balanced RL batch
        std::vector<const Transition*> explore, exploit;
        for (const auto& ep : c.episodes) {
            auto& dst = ep.rollout_mode == RolloutMode::prior ? explore : exploit;
            for (const auto& t : ep.transitions) dst.push_back(&t);
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (size_t i = 0; i < n; ++i) {
            const std::vector<const Transition*>* src;
            if (explore.empty())
                src = &exploit;
            else if (exploit.empty())
                src = &explore;
            else
                src = u(rng) < explore_fraction ? &explore : &exploit;
            std::uniform_int_distribution<size_t> p3(0, src->size() - 1);
            out.rl.push_back(*(*src)[p3(rng)]);
        }
        return out;
    }

    const std::vector<Cluster>& clusters() const { return clusters_; }

  private:
    size_t index(int a, int r) const { return static_cast<size_t>(a) * radius_bins_ + r; }

    int angle_bins_;
    int radius_bins_;
    double goal_distance_;
    double success_radius_;
    double ccw_;
    size_t capacity_;
    std::vector<Cluster> clusters_;
};

// Windowed relabelling statistics (hindsight task distance, reward signal
// from hindsight vs real batches).
class RelabelMetrics {
  public:
    void record_hindsight(const TaskDescriptor& task, const std::vector<Transition>& rl) {
        hindsight_batches_ += 1;
        distance_sum_ += std::hypot(task.goal[0], task.goal[1]);
        hindsight_nonzero_sum_ += nonzero_fraction(rl);
    }
    void record_real(const std::vector<Transition>& rl) {
        real_batches_ += 1;
        real_nonzero_sum_ += nonzero_fraction(rl);
    }

    struct Snapshot {
        std::optional<double> mean_hindsight_task_distance;
        std::optional<double> hindsight_nonzero_reward_fraction;
        std::optional<double> real_nonzero_reward_fraction;
    };

    Snapshot snapshot_and_reset() {
        Snapshot s;
        if (hindsight_batches_ > 0) {
            s.mean_hindsight_task_distance = distance_sum_ / hindsight_batches_;
            s.hindsight_nonzero_reward_fraction = hindsight_nonzero_sum_ / hindsight_batches_;
        }
        if (real_batches_ > 0)
            s.real_nonzero_reward_fraction = real_nonzero_sum_ / real_batches_;
        *this = RelabelMetrics{};
        return s;
    }

  private:
    static double nonzero_fraction(const std::vector<Transition>& rl) {
        if (rl.empty()) return 0.0;
        size_t nz = 0;
        for (const auto& t : rl)
            if (t.reward != 0.0) ++nz;
        return static_cast<double>(nz) / static_cast<double>(rl.size());
    }

    size_t hindsight_batches_ = 0;
    size_t real_batches_ = 0;
    double distance_sum_ = 0.0;
    double hindsight_nonzero_sum_ = 0.0;
    double real_nonzero_sum_ = 0.0;
};

struct TrainBatch {
    ContextBatch context;
    std::vector<Transition> rl;
    TaskDescriptor task;
    int task_id = 0;
    bool hindsight = false;
};

// Decides per training batch whether to substitute hindsight data, and
// produces the batches. Pure except for EC ingestion and metrics.
class Relabeler {
  public:
    Relabeler(RelabelConfig cfg, double goal_distance, double success_radius,
              double control_cost_weight)
        : cfg_(cfg), success_radius_(success_radius), ccw_(control_cost_weight) {
        if (cfg_.K < 0.0 || cfg_.K > 1.0)
            throw std::invalid_argument("RelabelConfig: K must be in [0, 1]");
        if (cfg_.enabled && cfg_.strategy == RelabelStrategy::EC)
            clusters_.emplace(cfg_.grid_angle_bins, cfg_.grid_radius_bins,
                              goal_distance, success_radius, control_cost_weight);
    }

    const RelabelConfig& config() const { return cfg_; }
    RelabelMetrics& metrics() { return metrics_; }
    EpisodeClusters* clusters() { return clusters_ ? &*clusters_ : nullptr; }

    // Called from data collection (EC is an eager, data-generation strategy).
    void on_trajectory_collected(const Trajectory& traj, std::mt19937_64& rng) {
        if (clusters_) clusters_->ingest(traj, rng);
    }

    // Real nonzero reward seen on this task; suppresses relabelling for it
    // when only_unsolved is set.
    void note_real_reward(int task_id) { solved_.insert(task_id); }

    double effective_k(long train_step) const {
        if (!cfg_.enabled) return 0.0;
        if (!cfg_.anneal || cfg_.anneal_steps <= 0) return cfg_.K;
        const double frac = 1.0 - static_cast<double>(train_step) /
                                      static_cast<double>(cfg_.anneal_steps);
        return cfg_.K * std::max(0.0, frac);
    }

    // Relabel with probability K (the pseudocode-vs-prose inequality is
    // resolved in favour of K = probability of relabelling). K = 0 draws
    // nothing from the rng so a disabled run is bitwise identical.
    TrainBatch select_batches(const TaskBuffer& buffer, size_t m, size_t n,
                              size_t recency_window, long train_step,
                              std::mt19937_64& rng) {
        const double k = effective_k(train_step);
        bool relabel = false;
        if (k > 0.0 && !(cfg_.only_unsolved && solved_.count(buffer.task_id()))) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            relabel = u(rng) < k;
        }
        if (relabel && cfg_.strategy == RelabelStrategy::EC && clusters_ &&
            !clusters_->any_nonempty())
            relabel = false;

        TrainBatch out;
        if (relabel) {
            HindsightBatch hb =
                cfg_.strategy == RelabelStrategy::SER
                    ? ser_sample(buffer, m, n, success_radius_, ccw_,
                                 kHindsightIdBase + ser_counter_++, rng)
                    : clusters_->sample(m, n, cfg_.ec_explore_fraction, rng);
            out.context = std::move(hb.context);
            out.rl = std::move(hb.rl);
            out.task = hb.task;
            out.task_id = hb.task_id;
            out.hindsight = true;
            metrics_.record_hindsight(out.task, out.rl);
        } else {
            out.context = buffer.sample_context(m, recency_window, rng);
            out.rl = buffer.sample_rl_batch(n, rng);
            out.task = buffer.task();
            out.task_id = buffer.task_id();
            out.hindsight = false;
            metrics_.record_real(out.rl);
        }
        return out;
    }

  private:
    RelabelConfig cfg_;
    double success_radius_;
    double ccw_;
    std::optional<EpisodeClusters> clusters_;
    std::set<int> solved_;
    RelabelMetrics metrics_;
    long ser_counter_ = 0;
};

}  // namespace htr
