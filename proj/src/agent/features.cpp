#include "babrl/agent/features.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace babrl::agent {

const std::array<std::string_view, kFeatureWidth>& feature_layout()
{
    static const std::array<std::string_view, kFeatureWidth> names{
        "pre_lower", "pre_upper",  "post_lower", "post_upper", "status_unfixed",  "status_active", "status_inactive",
        "soi_error", "polarity",   "babsr",      "unfixed_frac", "depth_frac",   "splits_log",    "phase_active"};
    return names;
}

FeatureContext FeatureContext::from_root(const Network& net, const NodeState& root)
{
    return {root.bounds, net.relu_count()};
}

Eigen::Index StateFeatures::index_of(const SplitAction& a) const
{
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == a)
            return static_cast<Eigen::Index>(i);
    throw std::out_of_range("action " + to_string(a) + " is not a candidate");
}

namespace {

double scaled(double v, double lo, double hi)
{
    const double w = hi - lo;
    if (!(w > 0.0))
        return 0.5;
    return std::clamp((v - lo) / w, 0.0, 1.0);
}

} // namespace

StateFeatures featurize(const Network& net, const FeatureContext& ctx, const NodeState& node,
                        const HeuristicScores& scores)
{
    if (scores.unfixed.empty())
        throw std::logic_error("featurize: node has no unfixed ReLU");

    double babsr_scale = 0.0;
    for (std::size_t r : scores.unfixed)
        babsr_scale = std::max(babsr_scale, std::abs(scores.babsr[static_cast<Eigen::Index>(r)]));

    const double total = static_cast<double>(std::max<std::size_t>(ctx.relu_count, 1));
    const double globals[kGlobalFeatures] = {
        static_cast<double>(scores.unfixed.size()) / total,
        static_cast<double>(node.depth) / total,
        std::log1p(static_cast<double>(node.splits_so_far)) / (total * std::numbers::ln2),
    };

    StateFeatures f;
    const auto n = static_cast<Eigen::Index>(2 * scores.unfixed.size());
    f.x.setZero(kFeatureWidth, n);
    f.candidates.reserve(static_cast<std::size_t>(n));
    Eigen::Index col = 0;
    for (std::size_t r : scores.unfixed) {
        const NeuronId& id = net.relu_id(r);
        const auto e = static_cast<Eigen::Index>(r);
        const double rl = ctx.root.pre_lower(id), ru = ctx.root.pre_upper(id);
        const double pl = ctx.root.post_lower(id), pu = ctx.root.post_upper(id);
        Eigen::Matrix<double, kFeatureWidth, 1> v;
        v << scaled(node.bounds.pre_lower(id), rl, ru), scaled(node.bounds.pre_upper(id), rl, ru),
            scaled(node.bounds.post_lower(id), pl, pu), scaled(node.bounds.post_upper(id), pl, pu),
            node.phases[r] == Phase::Unfixed, node.phases[r] == Phase::Active, node.phases[r] == Phase::Inactive,
            ru > rl ? scores.soi[e] / (ru - rl) : 0.0, scores.polarity[e],
            babsr_scale > 0.0 ? scores.babsr[e] / babsr_scale : 0.0, globals[0], globals[1], globals[2], 0.0;
        for (Phase p : {Phase::Active, Phase::Inactive}) {
            v[kFeatureWidth - 1] = p == Phase::Active ? 1.0 : 0.0;
            f.x.col(col++) = v;
            f.candidates.push_back({id, p});
        }
    }
    return f;
}

} // namespace babrl::agent
