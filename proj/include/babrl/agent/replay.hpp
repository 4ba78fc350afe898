#pragma once

#include "babrl/agent/features.hpp"

#include <deque>
#include <memory>
#include <vector>

namespace babrl::agent {

struct Transition {
    std::shared_ptr<const StateFeatures> state;
    Eigen::Index action = 0;
    double reward = 0.0;
    std::shared_ptr<const StateFeatures> next; // null when terminal
    bool terminal = false;
    bool is_demo = false;
    double priority = 1.0;
};

/// Binary sum tree over a fixed number of leaves.
class SumTree {
public:
    explicit SumTree(std::size_t capacity = 0);
    void set(std::size_t i, double value);
    double get(std::size_t i) const { return tree_[leaves_ + i]; }
    double total() const { return tree_[1]; }
    /// Leaf whose cumulative range contains `mass`, for 0 <= mass < total().
    std::size_t find(double mass) const;
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_ = 0;
    std::size_t leaves_ = 1;
    std::vector<double> tree_;
};

/// Prioritized replay. Demonstrations are never evicted; self transitions are
/// replaced oldest first once the buffer is full.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, double alpha);

    /// New transitions get the largest priority seen so far. Throws
    /// std::length_error if demonstrations alone would exceed the capacity.
    std::size_t add(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t demo_count() const { return demos_; }
    const Transition& operator[](std::size_t i) const { return items_.at(i); }

    void update_priority(std::size_t i, double priority);
    double alpha() const { return alpha_; }
    /// Rebuilds the tree when alpha changes.
    void set_alpha(double alpha);
    /// priority^alpha / sum of priority^alpha
    double probability(std::size_t i) const;
    const SumTree& tree() const { return tree_; }

private:
    std::size_t capacity_;
    double alpha_;
    double max_priority_ = 1.0;
    std::vector<Transition> items_;
    std::deque<std::size_t> self_slots_; // oldest first
    std::size_t demos_ = 0;
    SumTree tree_;
};

struct SampledBatch {
    std::vector<std::size_t> indices;
    std::vector<double> weights; // (N p)^-beta over the batch maximum
};

/// Draws `batch_size` indices with replacement, P(i) proportional to priority^alpha.
/// Throws std::invalid_argument on an empty buffer.
SampledBatch sample_prioritized(ReplayBuffer& buffer, std::size_t batch_size, double alpha, double beta, Rng& rng);

} // namespace babrl::agent
