#pragma once

#include "babrl/model.hpp"
#include "babrl/numeric/bounds.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace babrl {

using Rng = std::mt19937_64;

struct SplitAction {
    NeuronId neuron;
    Phase phase = Phase::Inactive; // Active or Inactive

    bool operator==(const SplitAction&) const = default;
};

SplitAction complement(const SplitAction& a);
std::string to_string(const SplitAction& a);
/// Parses "layer:index:A" / "layer:index:I".
SplitAction split_action_from_string(const std::string& s);

/// Relaxation LP solution projected onto the network's values.
struct RelaxationPoint {
    Eigen::VectorXd input;
    Eigen::VectorXd pre;  // flat ReLU index
    Eigen::VectorXd post; // flat ReLU index
    Eigen::VectorXd output;
};

/// One node of the splitting tree.
struct NodeState {
    std::uint64_t id = 0;
    std::int64_t parent = -1;
    PhaseMap phases;
    BoundsMap bounds;
    std::size_t depth = 0;         // decision splits on the path from the root
    std::size_t splits_so_far = 0; // decisions made in the whole run before this node
    std::optional<RelaxationPoint> relaxation;

    std::size_t unfixed_count() const;
    bool is_unfixed(std::size_t flat) const { return phases[flat] == Phase::Unfixed; }
};

enum class StrategyKind { SoI, Polarity, PseudoImpact, BaBSR, Agent };

std::string to_string(StrategyKind k);
/// Accepts soi, polarity, pseudo-impact, babsr, agent.
StrategyKind strategy_from_string(const std::string& s);
inline constexpr StrategyKind kStaticStrategies[] = {StrategyKind::SoI, StrategyKind::Polarity,
                                                     StrategyKind::PseudoImpact, StrategyKind::BaBSR};

struct HeuristicScores;

/// Pluggable chooser for the Agent strategy.
class SplitPolicy {
public:
    virtual ~SplitPolicy() = default;
    /// Called once per run with the deduced root, before any choose().
    virtual void start(const Network&, const NodeState&) {}
    virtual SplitAction choose(const Network& net, const NodeState& node, const HeuristicScores& scores,
                               Rng& rng) = 0;
};

struct Strategy {
    StrategyKind kind = StrategyKind::Polarity;
    std::shared_ptr<SplitPolicy> policy; // required for Agent

    static Strategy of(StrategyKind k) { return {k, nullptr}; }
};

} // namespace babrl
