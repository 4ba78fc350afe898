#include "babrl/search.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace babrl {

SplitAction complement(const SplitAction& a)
{
    return {a.neuron, a.phase == Phase::Active ? Phase::Inactive : Phase::Active};
}

std::string to_string(const SplitAction& a)
{
    return to_string(a.neuron) + ":" + phase_char(a.phase);
}

SplitAction split_action_from_string(const std::string& s)
{
    SplitAction a;
    char c1 = 0, c2 = 0, p = 0;
    std::istringstream in(s);
    if (!(in >> a.neuron.layer >> c1 >> a.neuron.index >> c2 >> p) || c1 != ':' || c2 != ':' ||
        (p != 'A' && p != 'I'))
        throw std::invalid_argument("malformed split action '" + s + "'");
    a.phase = p == 'A' ? Phase::Active : Phase::Inactive;
    return a;
}

std::size_t NodeState::unfixed_count() const
{
    return static_cast<std::size_t>(std::count(phases.begin(), phases.end(), Phase::Unfixed));
}

std::string to_string(StrategyKind k)
{
    switch (k) {
    case StrategyKind::SoI: return "soi";
    case StrategyKind::Polarity: return "polarity";
    case StrategyKind::PseudoImpact: return "pseudo-impact";
    case StrategyKind::BaBSR: return "babsr";
    case StrategyKind::Agent: return "agent";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s)
{
    for (StrategyKind k : {StrategyKind::SoI, StrategyKind::Polarity, StrategyKind::PseudoImpact,
                           StrategyKind::BaBSR, StrategyKind::Agent})
        if (to_string(k) == s)
            return k;
    throw std::invalid_argument("unknown strategy '" + s + "'");
}

std::string to_string(NodeOutcome o)
{
    switch (o) {
    case NodeOutcome::Split: return "split";
    case NodeOutcome::Unsat: return "unsat";
    case NodeOutcome::Sat: return "sat";
    }
    return "?";
}

void write_event_log(const EventLog& log, std::ostream& out)
{
    for (const auto& e : log) {
        if (e.kind == SearchEvent::Kind::Close) {
            out << "close " << e.id << "\n";
            continue;
        }
        out << "node " << e.id << " " << e.parent << " " << e.depth << " "
            << (e.edge ? to_string(*e.edge) : std::string("-")) << " " << e.unfixed << " "
            << to_string(e.outcome);
        if (e.split)
            out << " " << to_string(*e.split);
        out << "\n";
    }
}

EventLog parse_event_log(std::istream& in)
{
    EventLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string kind;
        if (!(ss >> kind))
            continue;
        const auto fail = [&](const std::string& why) {
            return std::invalid_argument("event log line " + std::to_string(line_no) + ": " + why);
        };
        SearchEvent e;
        if (kind == "close") {
            e.kind = SearchEvent::Kind::Close;
            if (!(ss >> e.id))
                throw fail("close without id");
        } else if (kind == "node") {
            std::string edge, outcome;
            if (!(ss >> e.id >> e.parent >> e.depth >> edge >> e.unfixed >> outcome))
                throw fail("truncated node event");
            if (edge != "-")
                e.edge = split_action_from_string(edge);
            if (outcome == "split") {
                e.outcome = NodeOutcome::Split;
                std::string split;
                if (!(ss >> split))
                    throw fail("split node without action");
                e.split = split_action_from_string(split);
            } else if (outcome == "unsat") {
                e.outcome = NodeOutcome::Unsat;
            } else if (outcome == "sat") {
                e.outcome = NodeOutcome::Sat;
            } else {
                throw fail("unknown outcome '" + outcome + "'");
            }
        } else {
            throw fail("unknown event '" + kind + "'");
        }
        log.push_back(std::move(e));
    }
    return log;
}

std::vector<std::pair<NeuronId, Phase>> deduce_phases(const Network& net, const BoundsMap& bounds,
                                                      const PhaseMap& phases)
{
    std::vector<std::pair<NeuronId, Phase>> out;
    for (std::size_t r = 0; r < net.relu_count(); ++r) {
        if (phases[r] != Phase::Unfixed)
            continue;
        const NeuronId& n = net.relu_id(r);
        if (bounds.pre_upper(n) <= kDeduceTolerance)
            out.emplace_back(n, Phase::Inactive);
        else if (bounds.pre_lower(n) >= -kDeduceTolerance)
            out.emplace_back(n, Phase::Active);
    }
    return out;
}

NodeState make_root(const Network& net)
{
    NodeState root;
    root.phases.assign(net.relu_count(), Phase::Unfixed);
    return root;
}

namespace {

bool property_excluded(const BoundsMap& b, const Query& q)
{
    for (const auto& c : q.constraints)
        if (output_lower_bound(b, c) > c.rhs + 1e-9 * (1.0 + std::abs(c.rhs)))
            return true;
    return false;
}

} // namespace

bool deduce_node(const Network& net, const Query& q, NodeState& node, bool lp_tightening)
{
    node.relaxation.reset();
    while (true) {
        auto b = propagate_intervals(net, q.input_lower, q.input_upper, node.phases,
                                     node.bounds.layers.empty() ? nullptr : &node.bounds);
        if (!b || property_excluded(*b, q))
            return false;
        node.bounds = std::move(*b);

        auto fixed = deduce_phases(net, node.bounds, node.phases);
        if (fixed.empty() && lp_tightening) {
            auto t = tighten_bounds_lp(net, node.phases, node.bounds, q.constraints);
            if (!t)
                return false;
            node.bounds = std::move(*t);
            if (property_excluded(node.bounds, q))
                return false;
            fixed = deduce_phases(net, node.bounds, node.phases);
        }
        if (fixed.empty())
            break;
        for (const auto& [n, p] : fixed)
            node.phases[net.flat_index(n)] = p;
    }

    NodeRelaxation relax(net, node.phases, node.bounds, q.constraints);
    Simplex simplex(relax.program());
    if (!simplex.feasible())
        return false;
    const LPResult r = simplex.minimize(relax.property_objective(q.constraints));

    RelaxationPoint pt;
    pt.input.resize(net.input_dim());
    for (Eigen::Index i = 0; i < net.input_dim(); ++i)
        pt.input[i] = r.assignment[relax.input_var(i)];
    const auto relus = static_cast<Eigen::Index>(net.relu_count());
    pt.pre.resize(relus);
    pt.post.resize(relus);
    for (std::size_t k = 0; k < net.relu_count(); ++k) {
        const NeuronId& n = net.relu_id(k);
        pt.pre[static_cast<Eigen::Index>(k)] = r.assignment[relax.pre_var(n)];
        pt.post[static_cast<Eigen::Index>(k)] = r.assignment[relax.post_var(n)];
    }
    pt.output.resize(net.output_dim());
    for (Eigen::Index j = 0; j < net.output_dim(); ++j)
        pt.output[j] = r.assignment[relax.output_var(j)];
    node.relaxation = std::move(pt);
    return true;
}

ChildNode apply_split(const Network& net, const Query& q, const NodeState& parent, const SplitAction& action,
                      bool lp_tightening)
{
    const std::size_t flat = net.flat_index(action.neuron);
    if (!parent.is_unfixed(flat))
        throw std::logic_error("apply_split: neuron " + to_string(action.neuron) + " is already fixed");
    ChildNode child{parent, false};
    child.node.parent = static_cast<std::int64_t>(parent.id);
    child.node.id = parent.id + 1;
    child.node.depth = parent.depth + 1;
    child.node.splits_so_far = parent.splits_so_far + 1;
    child.node.phases[flat] = action.phase;
    child.closed = !deduce_node(net, q, child.node, lp_tightening);
    return child;
}

namespace {

class Engine {
public:
    Engine(const Network& net, const Query& q, const Strategy& strategy, const Budget& budget,
           const SearchOptions& options)
        : net_(net), q_(q), strategy_(strategy), budget_(budget), options_(options), rng_(budget.seed)
    {
    }

    SearchRun run();

private:
    struct Frame {
        std::shared_ptr<const NodeState> node;
        SplitAction first;
        double soi = 0.0;
        int next_child = 0;
    };

    bool out_of_budget() const
    {
        return run_.verdict.iterations >= budget_.max_iterations ||
               std::chrono::steady_clock::now() - start_ >= budget_.timeout;
    }

    /// Deduces and classifies `node`; on Split fills `action`.
    NodeOutcome process(NodeState& node, const std::optional<SplitAction>& edge, SplitAction& action);
    void close(std::uint64_t id)
    {
        SearchEvent e;
        e.kind = SearchEvent::Kind::Close;
        e.id = id;
        run_.events.push_back(e);
    }
    void close_all()
    {
        while (!stack_.empty()) {
            close(stack_.back().node->id);
            stack_.pop_back();
        }
    }
    void finish(Outcome outcome)
    {
        run_.verdict.outcome = outcome;
        run_.verdict.wall_time =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    }

    const Network& net_;
    const Query& q_;
    const Strategy& strategy_;
    const Budget& budget_;
    const SearchOptions& options_;
    Rng rng_;
    PseudoImpactTable pi_;
    NodeState root_;
    SearchRun run_;
    std::vector<Frame> stack_;
    std::uint64_t next_id_ = 0;
    std::optional<Eigen::VectorXd> first_witness_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

NodeOutcome Engine::process(NodeState& node, const std::optional<SplitAction>& edge, SplitAction& action)
{
    ++run_.verdict.iterations;
    SearchEvent ev;
    ev.id = node.id;
    ev.parent = node.parent;
    ev.depth = node.depth;
    ev.edge = edge;

    const bool open = deduce_node(net_, q_, node, options_.lp_tightening);
    if (node.id == 0 && open) {
        pi_.initialize(net_, node.bounds);
        root_ = node;
        if (strategy_.policy)
            strategy_.policy->start(net_, node);
    }
    if (!open) {
        ev.unfixed = node.unfixed_count();
        ev.outcome = NodeOutcome::Unsat;
        run_.events.push_back(ev);
        return ev.outcome;
    }
    ev.unfixed = node.unfixed_count();

    std::optional<SplitAction> forced;
    if (node.depth < options_.forced_prefix.size()) {
        const SplitAction& f = options_.forced_prefix[node.depth];
        if (node.is_unfixed(net_.flat_index(f.neuron)))
            forced = f;
    }

    const Eigen::VectorXd& x = node.relaxation->input;
    if (ev.unfixed == 0) {
        if (!check_witness(net_, q_, x))
            throw std::runtime_error("numerical failure: exact leaf LP point fails the witness check");
        if (!first_witness_)
            first_witness_ = x;
        ev.outcome = NodeOutcome::Sat;
        run_.events.push_back(ev);
        return ev.outcome;
    }
    if (!forced && options_.stop_at_sat && soi_total(node) <= kOutputTolerance && check_witness(net_, q_, x)) {
        first_witness_ = x;
        ev.outcome = NodeOutcome::Sat;
        run_.events.push_back(ev);
        return ev.outcome;
    }

    const HeuristicScores scores = compute_scores(net_, node, q_.constraints, pi_);
    const bool initial = node.depth <= kInitialPolicyDepth;
    action = forced ? *forced : select_split(net_, node, strategy_, scores, rng_);
    if (!node.is_unfixed(net_.flat_index(action.neuron)))
        throw std::logic_error("strategy chose a fixed neuron " + to_string(action.neuron));
    if (options_.on_decision)
        options_.on_decision(DecisionRecord{root_, node, scores, action, initial && !forced, forced.has_value()});

    ++run_.verdict.splits;
    run_.split_sequence.push_back(action);
    ev.outcome = NodeOutcome::Split;
    ev.split = action;
    run_.events.push_back(ev);
    return ev.outcome;
}

SearchRun Engine::run()
{
    q_.validate(net_);
    NodeState root = make_root(net_);
    root.id = next_id_++;

    SplitAction action;
    if (out_of_budget()) {
        finish(Outcome::Timeout);
        return std::move(run_);
    }
    NodeOutcome outcome = process(root, std::nullopt, action);
    if (outcome != NodeOutcome::Split) {
        close(root.id);
        if (outcome == NodeOutcome::Sat)
            run_.verdict.witness = *first_witness_;
        finish(outcome == NodeOutcome::Sat ? Outcome::Sat : Outcome::Unsat);
        return std::move(run_);
    }
    const double root_soi = soi_total(root);
    stack_.push_back({std::make_shared<const NodeState>(std::move(root)), action, root_soi, 0});

    while (!stack_.empty()) {
        Frame& top = stack_.back();
        if (top.next_child == 2) {
            close(top.node->id);
            stack_.pop_back();
            continue;
        }
        if (out_of_budget()) {
            close_all();
            finish(Outcome::Timeout);
            return std::move(run_);
        }
        const SplitAction edge = top.next_child == 0 ? top.first : complement(top.first);
        ++top.next_child;

        const NodeState& parent = *top.node;
        NodeState child = parent;
        child.id = next_id_++;
        child.parent = static_cast<std::int64_t>(parent.id);
        child.depth = parent.depth + 1;
        child.splits_so_far = run_.verdict.splits;
        child.phases[net_.flat_index(edge.neuron)] = edge.phase;
        child.relaxation.reset();

        SplitAction next;
        outcome = process(child, edge, next);

        const std::size_t flat = net_.flat_index(edge.neuron);
        const double child_soi = child.relaxation ? soi_total(child) : 0.0;
        pi_.update(flat, top.soi - child_soi);

        if (outcome == NodeOutcome::Split) {
            const double soi = soi_total(child);
            stack_.push_back({std::make_shared<const NodeState>(std::move(child)), next, soi, 0});
            continue;
        }
        close(child.id);
        if (outcome == NodeOutcome::Sat && options_.stop_at_sat) {
            close_all();
            run_.verdict.witness = *first_witness_;
            finish(Outcome::Sat);
            return std::move(run_);
        }
    }

    if (first_witness_) {
        run_.verdict.witness = *first_witness_;
        finish(Outcome::Sat);
    } else {
        finish(Outcome::Unsat);
    }
    return std::move(run_);
}

} // namespace

SearchRun run_search(const Network& net, const Query& q, const Strategy& strategy, const Budget& budget,
                     const SearchOptions& options)
{
    Engine engine(net, q, strategy, budget, options);
    return engine.run();
}

Verdict verify(const Network& net, const Query& q, const Strategy& strategy, const Budget& budget,
               const SearchOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    try {
        return run_search(net, q, strategy, budget, options).verdict;
    } catch (const std::exception& e) {
        Verdict v;
        v.outcome = Outcome::Error;
        v.message = e.what();
        v.wall_time =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        return v;
    }
}

} // namespace babrl
