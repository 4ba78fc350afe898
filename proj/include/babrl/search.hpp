#pragma once

#include "babrl/heuristics.hpp"
#include "babrl/node.hpp"
#include "babrl/query.hpp"

#include <chrono>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

namespace babrl {

struct Budget {
    std::chrono::milliseconds timeout{60'000};
    std::uint64_t max_iterations = 10'000'000;
    std::uint64_t seed = 0;
};

/// What the engine hands to observers at every split decision.
struct DecisionRecord {
    const NodeState& root; // deduced root of the run
    const NodeState& node;
    const HeuristicScores& scores;
    SplitAction action;
    bool initial_policy; // made by the shared shallow-depth rule
    bool forced;         // taken from SearchOptions::forced_prefix
};

struct SearchOptions {
    /// LP min/max tightening of inputs and unfixed pre-activations at every node.
    bool lp_tightening = true;
    /// When false the whole tree is explored and SAT is only recognised at
    /// fully fixed leaves; used for tree-size analysis.
    bool stop_at_sat = true;
    /// Action to take at depth d while its neuron is still unfixed. A forced
    /// node is split even if its relaxation point is already a witness.
    std::vector<SplitAction> forced_prefix;
    std::function<void(const DecisionRecord&)> on_decision;
};

enum class NodeOutcome { Split, Unsat, Sat };

std::string to_string(NodeOutcome o);

/// Text form, one event per line:
///   node <id> <parent|-1> <depth> <edge-action|-> <unfixed> <split|unsat|sat> [<split-action>]
///   close <id>
/// `unfixed` is k(n), the number of unfixed ReLUs after deduction. Every node
/// is closed exactly once, after all of its descendants; when a run stops early
/// the still-open nodes are closed innermost first.
struct SearchEvent {
    enum class Kind { Node, Close };
    Kind kind = Kind::Node;
    std::uint64_t id = 0;
    std::int64_t parent = -1;
    std::size_t depth = 0;
    std::optional<SplitAction> edge;
    std::size_t unfixed = 0;
    NodeOutcome outcome = NodeOutcome::Unsat;
    std::optional<SplitAction> split;
};

using EventLog = std::vector<SearchEvent>;

void write_event_log(const EventLog& log, std::ostream& out);
EventLog parse_event_log(std::istream& in);

struct SearchRun {
    Verdict verdict;
    EventLog events;
    std::vector<SplitAction> split_sequence;
};

/// Neurons whose bounds are sign-definite: pre_upper <= 0 gives Inactive,
/// pre_lower >= 0 gives Active (both within kDeduceTolerance).
std::vector<std::pair<NeuronId, Phase>> deduce_phases(const Network& net, const BoundsMap& bounds,
                                                      const PhaseMap& phases);

/// Root node with every ReLU unfixed; not yet deduced.
NodeState make_root(const Network& net);

/// Runs interval propagation, optional LP tightening and phase deduction to a
/// fixpoint, then solves the relaxation LP for the node's relaxation point.
/// `node.bounds` is used as a prior when it is populated. Returns false when
/// the node holds no point satisfying the property (a conflict).
bool deduce_node(const Network& net, const Query& q, NodeState& node, bool lp_tightening = true);

struct ChildNode {
    NodeState node;
    bool closed = false;
};

/// Child of a deduced parent with `action` applied and re-deduced.
ChildNode apply_split(const Network& net, const Query& q, const NodeState& parent, const SplitAction& action,
                      bool lp_tightening = true);

/// Depth-first branch and bound over ReLU phases. Each processed node is one
/// iteration; each split decision is one split.
SearchRun run_search(const Network& net, const Query& q, const Strategy& strategy, const Budget& budget,
                     const SearchOptions& options = {});

Verdict verify(const Network& net, const Query& q, const Strategy& strategy, const Budget& budget,
               const SearchOptions& options = {});

} // namespace babrl
