#pragma once

#include "babrl/numeric/bounds.hpp"
#include "babrl/query.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace babrl::harness {

/// Largest ReLU count the pattern enumeration accepts.
inline constexpr std::size_t kOracleReluGuard = 20;

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One activation pattern: the network collapses to y = M x + d on the region
/// where every ReLU has its fixed sign.
struct PatternResult {
    PhaseMap phases;
    bool region_feasible = false;   // some x in the box realises the pattern
    bool property_feasible = false; // ... and satisfies the output constraints
    Eigen::VectorXd witness;        // when property_feasible
};

/// Every pattern in binary order (flat ReLU 0 is the most significant bit, 0 = Inactive).
/// Throws OracleError above kOracleReluGuard ReLUs.
std::vector<PatternResult> enumerate_patterns(const Network& net, const Query& q, bool stop_at_sat = false);

/// SAT iff some pattern's exact LP with the output constraints is feasible.
/// Shares only the LP solver with the branch-and-bound engine.
Verdict brute_force_verify(const Network& net, const Query& q);

/// Exact minimum of c . y over the box, by pattern enumeration.
double brute_force_minimum(const Network& net, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& c);

/// Upper estimate of min c . y for networks of any size: repeatedly minimises
/// over the activation region containing x and moves to the LP optimum.
double local_minimum(const Network& net, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const Eigen::VectorXd& c, Eigen::VectorXd x, int max_rounds = 20);

} // namespace babrl::harness
