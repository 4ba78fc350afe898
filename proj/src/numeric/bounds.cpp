#include "babrl/numeric/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace babrl {

namespace {

// LP optima are widened by this much before they are trusted as bounds.
constexpr double kLpBoundSlack = 1e-9;

double empty_tolerance(double a, double b)
{
    return 1e-9 * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Intersects [lo, hi] in place; false if the result is empty beyond rounding.
bool clamp_interval(double& lo, double& hi)
{
    if (lo <= hi)
        return true;
    if (lo - hi > empty_tolerance(lo, hi))
        return false;
    lo = hi = 0.5 * (lo + hi);
    return true;
}

} // namespace

char phase_char(Phase p)
{
    switch (p) {
    case Phase::Active: return 'A';
    case Phase::Inactive: return 'I';
    case Phase::Unfixed: return 'U';
    }
    return 'U';
}

std::optional<BoundsMap> propagate_intervals(const Network& net, const Eigen::VectorXd& box_lower,
                                             const Eigen::VectorXd& box_upper, const PhaseMap& phases,
                                             const BoundsMap* prior)
{
    if (phases.size() != net.relu_count())
        throw std::invalid_argument("phase map size does not match ReLU count");

    BoundsMap out;
    out.input_lower = box_lower;
    out.input_upper = box_upper;
    if (prior) {
        out.input_lower = out.input_lower.cwiseMax(prior->input_lower);
        out.input_upper = out.input_upper.cwiseMin(prior->input_upper);
    }
    for (Eigen::Index i = 0; i < out.input_lower.size(); ++i)
        if (!clamp_interval(out.input_lower[i], out.input_upper[i]))
            return std::nullopt;

    Eigen::VectorXd lo = out.input_lower;
    Eigen::VectorXd hi = out.input_upper;
    out.layers.reserve(net.layer_count());
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const Layer& layer = net.layer(k);
        const Eigen::MatrixXd pos = layer.weights.cwiseMax(0.0);
        const Eigen::MatrixXd neg = layer.weights.cwiseMin(0.0);
        LayerBounds lb;
        lb.pre_lower = pos * lo + neg * hi + layer.bias;
        lb.pre_upper = pos * hi + neg * lo + layer.bias;
        if (prior) {
            lb.pre_lower = lb.pre_lower.cwiseMax(prior->layers[k].pre_lower);
            lb.pre_upper = lb.pre_upper.cwiseMin(prior->layers[k].pre_upper);
        }
        const Eigen::Index width = layer.out_dim();
        lb.post_lower.resize(width);
        lb.post_upper.resize(width);
        for (Eigen::Index i = 0; i < width; ++i) {
            double& zl = lb.pre_lower[i];
            double& zu = lb.pre_upper[i];
            if (!clamp_interval(zl, zu))
                return std::nullopt;
            if (!layer.relu) {
                lb.post_lower[i] = zl;
                lb.post_upper[i] = zu;
                continue;
            }
            switch (phases[net.layer_offset(k) + static_cast<std::size_t>(i)]) {
            case Phase::Inactive:
                if (zl > kDeduceTolerance)
                    return std::nullopt;
                zu = std::min(zu, 0.0);
                zl = std::min(zl, zu);
                lb.post_lower[i] = 0.0;
                lb.post_upper[i] = 0.0;
                break;
            case Phase::Active:
                if (zu < -kDeduceTolerance)
                    return std::nullopt;
                zl = std::max(zl, 0.0);
                zu = std::max(zu, zl);
                lb.post_lower[i] = zl;
                lb.post_upper[i] = zu;
                break;
            case Phase::Unfixed:
                lb.post_lower[i] = std::max(zl, 0.0);
                lb.post_upper[i] = std::max(zu, 0.0);
                break;
            }
        }
        lo = lb.post_lower;
        hi = lb.post_upper;
        out.layers.push_back(std::move(lb));
    }
    return out;
}

double output_lower_bound(const BoundsMap& bounds, const OutputConstraint& c)
{
    const auto& y = bounds.output();
    return c.coeffs.cwiseMax(0.0).dot(y.post_lower) + c.coeffs.cwiseMin(0.0).dot(y.post_upper);
}

bool TriangleRelaxation::contains(double pre, double post, double tolerance) const
{
    for (const auto& r : rows)
        if (r.pre * pre + r.post * post > r.rhs + tolerance)
            return false;
    return true;
}

TriangleRelaxation triangle_relaxation(double lower, double upper)
{
    if (!(lower < 0.0 && upper > 0.0))
        throw std::invalid_argument("triangle relaxation needs lower < 0 < upper");
    TriangleRelaxation t;
    t.lower = lower;
    t.upper = upper;
    t.slope = upper / (upper - lower);
    t.rows[0] = {0.0, -1.0, 0.0};                 // post >= 0
    t.rows[1] = {1.0, -1.0, 0.0};                 // post >= pre
    t.rows[2] = {-t.slope, 1.0, -t.slope * lower}; // post <= slope * (pre - lower)
    return t;
}

NodeRelaxation::NodeRelaxation(const Network& net, const PhaseMap& phases, const BoundsMap& bounds,
                               std::span<const OutputConstraint> constraints)
{
    for (Eigen::Index i = 0; i < net.input_dim(); ++i)
        lp_.add_variable(bounds.input_lower[i], bounds.input_upper[i]);

    std::vector<Eigen::Index> prev(static_cast<std::size_t>(net.input_dim()));
    for (Eigen::Index i = 0; i < net.input_dim(); ++i)
        prev[static_cast<std::size_t>(i)] = i;

    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const Layer& layer = net.layer(k);
        const LayerBounds& lb = bounds.layers[k];
        const Eigen::Index width = layer.out_dim();

        pre_offset_.push_back(lp_.variable_count());
        for (Eigen::Index i = 0; i < width; ++i)
            lp_.add_variable(lb.pre_lower[i], lb.pre_upper[i]);

        // z_i - W_i . a = b_i
        for (Eigen::Index i = 0; i < width; ++i) {
            std::vector<std::pair<Eigen::Index, double>> terms;
            terms.emplace_back(pre_offset_.back() + i, 1.0);
            for (Eigen::Index j = 0; j < layer.in_dim(); ++j)
                if (layer.weights(i, j) != 0.0)
                    terms.emplace_back(prev[static_cast<std::size_t>(j)], -layer.weights(i, j));
            lp_.add_row(std::move(terms), RowSense::Equal, layer.bias[i]);
        }

        if (!layer.relu) {
            post_offset_.push_back(pre_offset_.back());
            continue;
        }

        post_offset_.push_back(lp_.variable_count());
        std::vector<Eigen::Index> next(static_cast<std::size_t>(width));
        for (Eigen::Index i = 0; i < width; ++i) {
            const Eigen::Index z = pre_offset_.back() + i;
            const double zl = lb.pre_lower[i];
            const double zu = lb.pre_upper[i];
            Phase p = phases[net.layer_offset(k) + static_cast<std::size_t>(i)];
            if (p == Phase::Unfixed && zu <= 0.0)
                p = Phase::Inactive;
            else if (p == Phase::Unfixed && zl >= 0.0)
                p = Phase::Active;

            Eigen::Index a;
            switch (p) {
            case Phase::Inactive:
                a = lp_.add_variable(0.0, 0.0);
                break;
            case Phase::Active:
                a = lp_.add_variable(std::max(zl, 0.0), std::max(zu, 0.0));
                lp_.add_row({{a, 1.0}, {z, -1.0}}, RowSense::Equal, 0.0);
                break;
            case Phase::Unfixed:
            default: {
                a = lp_.add_variable(0.0, zu);
                const auto tri = triangle_relaxation(zl, zu);
                lp_.add_row({{z, tri.rows[1].pre}, {a, tri.rows[1].post}}, RowSense::LessEqual, tri.rows[1].rhs);
                lp_.add_row({{z, tri.rows[2].pre}, {a, tri.rows[2].post}}, RowSense::LessEqual, tri.rows[2].rhs);
                break;
            }
            }
            next[static_cast<std::size_t>(i)] = a;
        }
        prev = std::move(next);
    }

    for (const auto& c : constraints) {
        std::vector<std::pair<Eigen::Index, double>> terms;
        for (Eigen::Index j = 0; j < c.coeffs.size(); ++j)
            if (c.coeffs[j] != 0.0)
                terms.emplace_back(output_var(j), c.coeffs[j]);
        lp_.add_row(std::move(terms), RowSense::LessEqual, c.rhs);
    }
}

Eigen::VectorXd NodeRelaxation::property_objective(std::span<const OutputConstraint> constraints) const
{
    Eigen::VectorXd obj = Eigen::VectorXd::Zero(lp_.variable_count());
    for (const auto& c : constraints)
        for (Eigen::Index j = 0; j < c.coeffs.size(); ++j)
            obj[output_var(j)] += c.coeffs[j];
    return obj;
}

std::optional<BoundsMap> tighten_bounds_lp(const Network& net, const PhaseMap& phases, const BoundsMap& bounds,
                                           std::span<const OutputConstraint> constraints)
{
    NodeRelaxation relax(net, phases, bounds, constraints);
    Simplex simplex(relax.program());
    if (!simplex.feasible())
        return std::nullopt;

    BoundsMap tightened = bounds;
    Eigen::VectorXd objective = Eigen::VectorXd::Zero(relax.program().variable_count());
    auto tighten = [&](Eigen::Index var, double& lo, double& hi) {
        objective.setZero();
        objective[var] = 1.0;
        const double min = simplex.minimize(objective).objective;
        const double max = simplex.maximize(objective).objective;
        lo = std::max(lo, min - kLpBoundSlack);
        hi = std::min(hi, max + kLpBoundSlack);
    };

    for (Eigen::Index i = 0; i < net.input_dim(); ++i)
        tighten(relax.input_var(i), tightened.input_lower[i], tightened.input_upper[i]);
    for (std::size_t r = 0; r < net.relu_count(); ++r) {
        if (phases[r] != Phase::Unfixed)
            continue;
        const NeuronId& n = net.relu_id(r);
        auto& lb = tightened.layers[n.layer];
        const auto i = static_cast<Eigen::Index>(n.index);
        tighten(relax.pre_var(n), lb.pre_lower[i], lb.pre_upper[i]);
    }

    // Push the tightened intervals through later layers; the prior keeps every
    // bound at least as tight as before.
    return propagate_intervals(net, tightened.input_lower, tightened.input_upper, phases, &tightened);
}

} // namespace babrl
