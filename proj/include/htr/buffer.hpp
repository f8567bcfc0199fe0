#pragma once

#include <deque>
#include <random>
#include <stdexcept>

#include "htr/env.hpp"

namespace htr {

enum class BatchSource { real, hindsight };

struct ContextBatch {
    std::vector<Transition> transitions;
    BatchSource source = BatchSource::real;
};

// Per-task episodic replay store. Keeps whole trajectories so episodes can
// be sampled intact; evicts oldest episodes first when over capacity.
class TaskBuffer {
  public:
    TaskBuffer(TaskDescriptor task, int task_id, size_t capacity)
        : task_(task), task_id_(task_id), capacity_(capacity) {}

    const TaskDescriptor& task() const { return task_; }
    int task_id() const { return task_id_; }
    size_t total_transitions() const { return total_; }
    size_t episode_count() const { return episodes_.size(); }
    bool empty() const { return total_ == 0; }
    const std::deque<Trajectory>& episodes() const { return episodes_; }

    void add_trajectory(Trajectory traj) {
        if (traj.task_id != task_id_)
            throw std::invalid_argument("TaskBuffer: trajectory task_id mismatch");
        total_ += traj.size();
        episodes_.push_back(std::move(traj));
        while (total_ > capacity_ && episodes_.size() > 1) {
            total_ -= episodes_.front().size();
            episodes_.pop_front();
        }
    }

    // M transitions uniform over the most recent `recency_window` transitions
    // (0 = whole buffer), without replacement when possible.
    ContextBatch sample_context(size_t m, size_t recency_window,
                                std::mt19937_64& rng) const {
        if (empty()) throw std::logic_error("TaskBuffer: sample_context on empty buffer");
        const size_t window =
            recency_window == 0 ? total_ : std::min(recency_window, total_);
        ContextBatch batch;
        batch.source = BatchSource::real;
        if (m >= window) {
            // Take the whole window.
            batch.transitions = last_n(window);
        } else {
            std::vector<size_t> idx(window);
            for (size_t i = 0; i < window; ++i) idx[i] = total_ - window + i;
            for (size_t i = 0; i < m; ++i) {
                std::uniform_int_distribution<size_t> pick(i, window - 1);
                std::swap(idx[i], idx[pick(rng)]);
                batch.transitions.push_back(at(idx[i]));
            }
        }
        return batch;
    }

    // N transitions uniform over the whole buffer, with replacement when the
    // buffer is smaller than N.
    std::vector<Transition> sample_rl_batch(size_t n, std::mt19937_64& rng) const {
        if (empty()) throw std::logic_error("TaskBuffer: sample_rl_batch on empty buffer");
        std::vector<Transition> out;
        out.reserve(n);
        std::uniform_int_distribution<size_t> pick(0, total_ - 1);
        for (size_t i = 0; i < n; ++i) out.push_back(at(pick(rng)));
        return out;
    }

    const Trajectory& sample_episode(std::mt19937_64& rng) const {
        if (episodes_.empty())
            throw std::logic_error("TaskBuffer: sample_episode on empty buffer");
        std::uniform_int_distribution<size_t> pick(0, episodes_.size() - 1);
        return episodes_[pick(rng)];
    }

    // Flat index across episodes, oldest first.
    const Transition& at(size_t flat) const {
        for (const auto& ep : episodes_) {
            if (flat < ep.size()) return ep.transitions[flat];
            flat -= ep.size();
        }
        throw std::out_of_range("TaskBuffer::at");
    }

  private:
    std::vector<Transition> last_n(size_t n) const {
        std::vector<Transition> out;
        out.reserve(n);
        for (size_t i = total_ - n; i < total_; ++i) out.push_back(at(i));
        return out;
    }

    TaskDescriptor task_;
    int task_id_;
    size_t capacity_;
    size_t total_ = 0;
    std::deque<Trajectory> episodes_;
};

}  // namespace htr
