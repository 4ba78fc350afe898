#pragma once

#include "babrl/search.hpp"

#include <stdexcept>
#include <vector>

namespace babrl::agent {

class RewardLogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Delayed penalty of one split decision: -actual / full where full = 2^k - 1
/// for the k unfixed ReLUs at the decision, and actual counts the splits in
/// the subtree the decision opened, itself included.
struct RewardRecord {
    std::uint64_t node_id = 0;
    SplitAction action;
    std::size_t depth = 0;
    std::size_t unfixed = 0;
    std::uint64_t actual = 0;
    double full = 0.0;
    double reward = 0.0;
    std::size_t close_order = 0; // rank of the subtree close among all split closes
};

/// One record per split event, in DFS action order. Throws RewardLogError when
/// node and close events are unbalanced or out of order.
std::vector<RewardRecord> record_delayed_rewards(const EventLog& log);

} // namespace babrl::agent
