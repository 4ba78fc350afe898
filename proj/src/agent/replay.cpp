#include "babrl/agent/replay.hpp"

#include <cmath>
#include <stdexcept>

namespace babrl::agent {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity)
{
    while (leaves_ < capacity)
        leaves_ *= 2;
    tree_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t i, double value)
{
    if (i >= capacity_)
        throw std::out_of_range("sum tree index");
    std::size_t node = leaves_ + i;
    tree_[node] = value;
    for (node /= 2; node >= 1; node /= 2)
        tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

std::size_t SumTree::find(double mass) const
{
    std::size_t node = 1;
    while (node < leaves_) {
        const double left = tree_[2 * node];
        if (mass < left || tree_[2 * node + 1] <= 0.0) {
            node = 2 * node;
        } else {
            mass -= left;
            node = 2 * node + 1;
        }
    }
    return std::min(node - leaves_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha) : capacity_(capacity), alpha_(alpha), tree_(capacity)
{
    if (capacity == 0)
        throw std::invalid_argument("replay buffer capacity must be positive");
}

std::size_t ReplayBuffer::add(Transition t)
{
    t.priority = max_priority_;
    std::size_t slot;
    if (items_.size() < capacity_) {
        slot = items_.size();
        items_.push_back(std::move(t));
    } else {
        if (self_slots_.empty())
            throw std::length_error("replay buffer is full of demonstrations");
        slot = self_slots_.front();
        self_slots_.pop_front();
        items_[slot] = std::move(t);
    }
    if (items_[slot].is_demo)
        ++demos_;
    else
        self_slots_.push_back(slot);
    tree_.set(slot, std::pow(items_[slot].priority, alpha_));
    return slot;
}

void ReplayBuffer::update_priority(std::size_t i, double priority)
{
    if (!(priority > 0.0) || !std::isfinite(priority))
        throw std::invalid_argument("replay priority must be positive and finite");
    items_.at(i).priority = priority;
    max_priority_ = std::max(max_priority_, priority);
    tree_.set(i, std::pow(priority, alpha_));
}

void ReplayBuffer::set_alpha(double alpha)
{
    if (alpha == alpha_)
        return;
    alpha_ = alpha;
    for (std::size_t i = 0; i < items_.size(); ++i)
        tree_.set(i, std::pow(items_[i].priority, alpha_));
}

double ReplayBuffer::probability(std::size_t i) const
{
    return tree_.get(i) / tree_.total();
}

SampledBatch sample_prioritized(ReplayBuffer& buffer, std::size_t batch_size, double alpha, double beta, Rng& rng)
{
    if (buffer.size() == 0)
        throw std::invalid_argument("sample_prioritized: empty buffer");
    buffer.set_alpha(alpha);
    const double total = buffer.tree().total();
    std::uniform_real_distribution<double> u(0.0, total);
    SampledBatch b;
    b.indices.reserve(batch_size);
    b.weights.reserve(batch_size);
    double max_w = 0.0;
    const auto n = static_cast<double>(buffer.size());
    for (std::size_t k = 0; k < batch_size; ++k) {
        std::size_t i = buffer.tree().find(u(rng));
        if (i >= buffer.size())
            i = buffer.size() - 1;
        const double w = std::pow(n * buffer.probability(i), -beta);
        b.indices.push_back(i);
        b.weights.push_back(w);
        max_w = std::max(max_w, w);
    }
    for (double& w : b.weights)
        w /= max_w;
    return b;
}

} // namespace babrl::agent
