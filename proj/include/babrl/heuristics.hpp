#pragma once

#include "babrl/node.hpp"

#include <map>
#include <span>
#include <vector>

namespace babrl {

/// Deviation of a relaxation point from the ReLU graph: min(post - pre, post).
double soi_error(double pre, double post);

/// Sum of soi_error over every ReLU at the node's relaxation point.
/// Throws std::logic_error if the node has no relaxation point.
double soi_total(const NodeState& node);

/// (a + b) / (b - a) for a < 0 < b; throws std::invalid_argument otherwise.
double polarity(double lower, double upper);

/// Quantities of the BaBSR backward pass, indexed by flat ReLU number.
///
/// With c the summed output-constraint coefficients (the direction whose
/// minimum the node must push above the bound):
///   lambda_out = c
///   nu_hat_k   = W_{k+1}^T lambda_{k+1}     (sensitivity to the post-activation)
///   lambda_k   = slope_k * nu_hat_k          (sensitivity to the pre-activation)
/// where slope is 1 for Active, 0 for Inactive and u/(u-l) for Unfixed ReLUs.
/// v_i = lambda_i and bias_i is the bias feeding the pre-activation.
struct BaBSRBackward {
    Eigen::VectorXd v;
    Eigen::VectorXd nu_hat;
    Eigen::VectorXd bias;
};

BaBSRBackward babsr_backward(const Network& net, const NodeState& node,
                             std::span<const OutputConstraint> constraints);

/// s_i = max(v_i b_i, (v_i - 1) b_i) - u_i/(u_i - l_i) * max(nu_hat_i, 0) per unfixed ReLU.
/// Throws std::invalid_argument when an unfixed ReLU has u_i == l_i.
std::map<NeuronId, double> babsr_scores(const Network& net, const NodeState& node,
                                        std::span<const OutputConstraint> constraints);

/// beta * old + (1 - beta) * delta
double pseudo_impact_update(double old_value, double delta, double beta);

inline constexpr double kPseudoImpactBeta = 0.5;

/// Per-run Pseudo-Impact scores, flat ReLU index.
class PseudoImpactTable {
public:
    PseudoImpactTable() = default;
    /// Seeds each ReLU with its root pre-activation width over the widest one.
    void initialize(const Network& net, const BoundsMap& root_bounds);
    void update(std::size_t flat, double delta, double beta = kPseudoImpactBeta);
    double operator[](std::size_t flat) const { return values_.at(flat); }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

/// Scores of every unfixed ReLU at a node; NaN at fixed positions.
struct HeuristicScores {
    std::vector<std::size_t> unfixed; // flat indices, ascending
    Eigen::VectorXd soi;
    Eigen::VectorXd polarity;
    Eigen::VectorXd babsr;
    Eigen::VectorXd pseudo_impact;
};

HeuristicScores compute_scores(const Network& net, const NodeState& node,
                               std::span<const OutputConstraint> constraints, const PseudoImpactTable& pi);

/// Splits at depth <= this use Pseudo-Impact for every strategy.
inline constexpr std::size_t kInitialPolicyDepth = 3;

/// Picks the next split. Depth <= kInitialPolicyDepth defers to Pseudo-Impact;
/// otherwise SoI takes the largest error, Polarity the smallest |p|,
/// PseudoImpact the largest PI, BaBSR the largest score and Agent asks its
/// policy. Ties go to the lowest NeuronId; static rules explore Inactive first.
SplitAction select_split(const Network& net, const NodeState& node, const Strategy& strategy,
                         const HeuristicScores& scores, Rng& rng);

/// The static rule alone, without the initial-depth override.
SplitAction static_choice(const Network& net, StrategyKind kind, const HeuristicScores& scores);

} // namespace babrl
