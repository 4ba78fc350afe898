#pragma once

#include "babrl/model.hpp"
#include "babrl/numeric/simplex.hpp"
#include "babrl/query.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace babrl {

/// Pre-activation bounds within this distance of zero count as sign-definite.
inline constexpr double kDeduceTolerance = 1e-8;

enum class Phase : unsigned char { Unfixed, Active, Inactive };

char phase_char(Phase p);

/// Indexed by the network's flat ReLU numbering.
using PhaseMap = std::vector<Phase>;

struct LayerBounds {
    Eigen::VectorXd pre_lower;
    Eigen::VectorXd pre_upper;
    Eigen::VectorXd post_lower; // equals pre bounds on the linear output layer
    Eigen::VectorXd post_upper;
};

struct BoundsMap {
    Eigen::VectorXd input_lower;
    Eigen::VectorXd input_upper;
    std::vector<LayerBounds> layers;

    double pre_lower(const NeuronId& n) const { return layers[n.layer].pre_lower[static_cast<Eigen::Index>(n.index)]; }
    double pre_upper(const NeuronId& n) const { return layers[n.layer].pre_upper[static_cast<Eigen::Index>(n.index)]; }
    double post_lower(const NeuronId& n) const { return layers[n.layer].post_lower[static_cast<Eigen::Index>(n.index)]; }
    double post_upper(const NeuronId& n) const { return layers[n.layer].post_upper[static_cast<Eigen::Index>(n.index)]; }
    const LayerBounds& output() const { return layers.back(); }
};

/// Forward interval arithmetic with ReLU phases applied. When `prior` is given,
/// every interval is intersected with it, so tightened bounds persist.
/// Returns nullopt on conflict: a phase contradicts its bounds or some interval
/// is empty, i.e. the node holds no point.
std::optional<BoundsMap> propagate_intervals(const Network& net, const Eigen::VectorXd& box_lower,
                                             const Eigen::VectorXd& box_upper, const PhaseMap& phases,
                                             const BoundsMap* prior = nullptr);

/// Smallest value of c . y over the output intervals; > rhs means the property
/// cannot hold anywhere in the node.
double output_lower_bound(const BoundsMap& bounds, const OutputConstraint& c);

/// Convex hull of the ReLU graph over [lower, upper] with lower < 0 < upper:
///   post >= 0,  post >= pre,  post <= slope * (pre - lower).
struct TriangleRelaxation {
    struct Row {
        double pre;  // coefficient of pre
        double post; // coefficient of post
        double rhs;  // pre*x + post*y <= rhs
    };

    double lower = 0.0;
    double upper = 0.0;
    double slope = 0.0;
    std::array<Row, 3> rows{};

    bool contains(double pre, double post, double tolerance = kLpTolerance) const;
};

/// Throws std::invalid_argument unless lower < 0 < upper.
TriangleRelaxation triangle_relaxation(double lower, double upper);

/// LP relaxation of one BaB node: exact affine layers, fixed ReLUs as linear
/// pieces, triangle hulls for unfixed ReLUs, plus the output constraints.
class NodeRelaxation {
public:
    NodeRelaxation(const Network& net, const PhaseMap& phases, const BoundsMap& bounds,
                   std::span<const OutputConstraint> constraints);

    const LinearProgram& program() const { return lp_; }
    Eigen::Index input_var(Eigen::Index i) const { return i; }
    Eigen::Index pre_var(const NeuronId& n) const { return pre_offset_[n.layer] + static_cast<Eigen::Index>(n.index); }
    Eigen::Index post_var(const NeuronId& n) const { return post_offset_[n.layer] + static_cast<Eigen::Index>(n.index); }
    Eigen::Index output_var(Eigen::Index j) const { return pre_offset_.back() + j; }

    /// Objective vector that minimises the sum of the constraint left-hand sides.
    Eigen::VectorXd property_objective(std::span<const OutputConstraint> constraints) const;

private:
    LinearProgram lp_;
    std::vector<Eigen::Index> pre_offset_;
    std::vector<Eigen::Index> post_offset_;
};

/// Minimises and maximises every input and every unfixed pre-activation over the
/// node relaxation and intersects the results with `bounds`; the returned map is
/// re-propagated forward so all layers agree. Never widens a bound.
/// Returns nullopt when the relaxation is infeasible.
std::optional<BoundsMap> tighten_bounds_lp(const Network& net, const PhaseMap& phases, const BoundsMap& bounds,
                                           std::span<const OutputConstraint> constraints = {});

} // namespace babrl
