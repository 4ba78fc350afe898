#pragma once

#include "babrl/heuristics.hpp"
#include "babrl/node.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace babrl::agent {

/// Per-candidate input of the Q-network:
///   0-3   pre_lower, pre_upper, post_lower, post_upper (min-max scaled by root bounds)
///   4-6   status one-hot (unfixed, active, inactive)
///   7     soi error over the root pre-activation width
///   8     polarity
///   9     BaBSR score over the largest |score| at the node
///   10    unfixed / total ReLUs
///   11    depth / total ReLUs
///   12    log2(1 + splits so far) / total ReLUs
///   13    phase bit (1 = Active)
inline constexpr int kLocalFeatures = 10;
inline constexpr int kGlobalFeatures = 3;
inline constexpr int kFeatureWidth = kLocalFeatures + kGlobalFeatures + 1;

const std::array<std::string_view, kFeatureWidth>& feature_layout();

/// Root bounds used for scaling; fixed for one verify run.
struct FeatureContext {
    BoundsMap root;
    std::size_t relu_count = 0;

    static FeatureContext from_root(const Network& net, const NodeState& root);
};

/// Candidates sorted by (NeuronId, phase), Active before Inactive; one column each.
struct StateFeatures {
    std::vector<SplitAction> candidates;
    Eigen::MatrixXd x; // kFeatureWidth x candidates

    Eigen::Index size() const { return x.cols(); }
    /// Column of `a`; throws std::out_of_range if it is not a candidate.
    Eigen::Index index_of(const SplitAction& a) const;
};

/// Throws std::logic_error if the node has no unfixed ReLU.
StateFeatures featurize(const Network& net, const FeatureContext& ctx, const NodeState& node,
                        const HeuristicScores& scores);

} // namespace babrl::agent
