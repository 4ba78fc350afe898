#include "babrl/heuristics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace babrl {

double soi_error(double pre, double post)
{
    return std::min(post - pre, post);
}

double soi_total(const NodeState& node)
{
    if (!node.relaxation)
        throw std::logic_error("soi_total: node has no relaxation solution");
    const auto& r = *node.relaxation;
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.pre.size(); ++i)
        total += soi_error(r.pre[i], r.post[i]);
    return total;
}

double polarity(double lower, double upper)
{
    if (!(lower < 0.0 && upper > 0.0))
        throw std::invalid_argument("polarity needs lower < 0 < upper");
    return (lower + upper) / (upper - lower);
}

BaBSRBackward babsr_backward(const Network& net, const NodeState& node,
                             std::span<const OutputConstraint> constraints)
{
    const auto relus = static_cast<Eigen::Index>(net.relu_count());
    BaBSRBackward out{Eigen::VectorXd::Zero(relus), Eigen::VectorXd::Zero(relus), Eigen::VectorXd::Zero(relus)};

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(net.output_dim());
    for (const auto& c : constraints)
        lambda += c.coeffs;

    for (std::size_t k = net.layer_count() - 1; k-- > 0;) {
        const Layer& layer = net.layer(k);
        const Eigen::VectorXd nu_hat = net.layer(k + 1).weights.transpose() * lambda;
        Eigen::VectorXd next(layer.out_dim());
        const LayerBounds& lb = node.bounds.layers[k];
        for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
            const std::size_t flat = net.layer_offset(k) + static_cast<std::size_t>(i);
            double slope = 0.0;
            switch (node.phases[flat]) {
            case Phase::Active: slope = 1.0; break;
            case Phase::Inactive: slope = 0.0; break;
            case Phase::Unfixed: {
                const double l = lb.pre_lower[i];
                const double u = lb.pre_upper[i];
                if (u <= 0.0)
                    slope = 0.0;
                else if (l >= 0.0)
                    slope = 1.0;
                else
                    slope = u / (u - l);
                break;
            }
            }
            next[i] = slope * nu_hat[i];
            const auto e = static_cast<Eigen::Index>(flat);
            out.v[e] = next[i];
            out.nu_hat[e] = nu_hat[i];
            out.bias[e] = layer.bias[i];
        }
        lambda = std::move(next);
    }
    return out;
}

namespace {

double babsr_score(double v, double nu_hat, double bias, double l, double u)
{
    if (u == l)
        throw std::invalid_argument("babsr score: degenerate pre-activation interval");
    return std::max(v * bias, (v - 1.0) * bias) - (u / (u - l)) * std::max(nu_hat, 0.0);
}

} // namespace

std::map<NeuronId, double> babsr_scores(const Network& net, const NodeState& node,
                                        std::span<const OutputConstraint> constraints)
{
    std::map<NeuronId, double> scores;
    const BaBSRBackward back = babsr_backward(net, node, constraints);
    for (std::size_t r = 0; r < net.relu_count(); ++r) {
        if (!node.is_unfixed(r))
            continue;
        const NeuronId& n = net.relu_id(r);
        const auto e = static_cast<Eigen::Index>(r);
        scores[n] = babsr_score(back.v[e], back.nu_hat[e], back.bias[e], node.bounds.pre_lower(n),
                                node.bounds.pre_upper(n));
    }
    return scores;
}

double pseudo_impact_update(double old_value, double delta, double beta)
{
    return beta * old_value + (1.0 - beta) * delta;
}

void PseudoImpactTable::initialize(const Network& net, const BoundsMap& root_bounds)
{
    values_.assign(net.relu_count(), 0.0);
    double widest = 0.0;
    for (std::size_t r = 0; r < net.relu_count(); ++r) {
        const NeuronId& n = net.relu_id(r);
        values_[r] = std::abs(root_bounds.pre_upper(n) - root_bounds.pre_lower(n));
        widest = std::max(widest, values_[r]);
    }
    if (widest > 0.0)
        for (auto& v : values_)
            v /= widest;
}

void PseudoImpactTable::update(std::size_t flat, double delta, double beta)
{
    values_.at(flat) = pseudo_impact_update(values_[flat], std::abs(delta), beta);
}

HeuristicScores compute_scores(const Network& net, const NodeState& node,
                               std::span<const OutputConstraint> constraints, const PseudoImpactTable& pi)
{
    const auto relus = static_cast<Eigen::Index>(net.relu_count());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    HeuristicScores s;
    s.soi = Eigen::VectorXd::Constant(relus, nan);
    s.polarity = Eigen::VectorXd::Constant(relus, nan);
    s.babsr = Eigen::VectorXd::Constant(relus, nan);
    s.pseudo_impact = Eigen::VectorXd::Constant(relus, nan);

    const BaBSRBackward back = babsr_backward(net, node, constraints);
    for (std::size_t r = 0; r < net.relu_count(); ++r) {
        if (!node.is_unfixed(r))
            continue;
        s.unfixed.push_back(r);
        const NeuronId& n = net.relu_id(r);
        const auto e = static_cast<Eigen::Index>(r);
        const double l = node.bounds.pre_lower(n);
        const double u = node.bounds.pre_upper(n);
        s.polarity[e] = polarity(l, u);
        s.babsr[e] = babsr_score(back.v[e], back.nu_hat[e], back.bias[e], l, u);
        s.soi[e] = node.relaxation ? soi_error(node.relaxation->pre[e], node.relaxation->post[e]) : 0.0;
        s.pseudo_impact[e] = pi.values().empty() ? 0.0 : pi[r];
    }
    return s;
}

namespace {

// Lowest flat index wins ties because candidates are scanned in ascending order
// and only a strictly better value replaces the incumbent.
template <typename Better>
std::size_t best_of(const HeuristicScores& s, const Eigen::VectorXd& key, Better better)
{
    std::size_t best = s.unfixed.front();
    for (std::size_t r : s.unfixed)
        if (better(key[static_cast<Eigen::Index>(r)], key[static_cast<Eigen::Index>(best)]))
            best = r;
    return best;
}

} // namespace

SplitAction static_choice(const Network& net, StrategyKind kind, const HeuristicScores& scores)
{
    if (scores.unfixed.empty())
        throw std::logic_error("select_split: no unfixed neuron");
    std::size_t flat = 0;
    switch (kind) {
    case StrategyKind::SoI:
        flat = best_of(scores, scores.soi, std::greater<>());
        break;
    case StrategyKind::Polarity:
        flat = best_of(scores, scores.polarity, [](double a, double b) { return std::abs(a) < std::abs(b); });
        break;
    case StrategyKind::PseudoImpact:
        flat = best_of(scores, scores.pseudo_impact, std::greater<>());
        break;
    case StrategyKind::BaBSR:
        flat = best_of(scores, scores.babsr, std::greater<>());
        break;
    case StrategyKind::Agent:
        throw std::logic_error("static_choice: Agent is not a static rule");
    }
    return {net.relu_id(flat), Phase::Inactive};
}

SplitAction select_split(const Network& net, const NodeState& node, const Strategy& strategy,
                         const HeuristicScores& scores, Rng& rng)
{
    if (scores.unfixed.empty())
        throw std::logic_error("select_split: no unfixed neuron");
    if (node.depth <= kInitialPolicyDepth)
        return static_choice(net, StrategyKind::PseudoImpact, scores);
    if (strategy.kind == StrategyKind::Agent) {
        if (!strategy.policy)
            throw std::logic_error("select_split: Agent strategy without a policy");
        return strategy.policy->choose(net, node, scores, rng);
    }
    return static_choice(net, strategy.kind, scores);
}

} // namespace babrl
