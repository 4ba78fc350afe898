#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace babrl {

inline constexpr double kLpTolerance = 1e-7;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Solver failure (iteration cap, unboundedness). Never means "infeasible".
class LPError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LinearRow {
    std::vector<std::pair<Eigen::Index, double>> terms;
    RowSense sense = RowSense::LessEqual;
    double rhs = 0.0;
};

/// min objective . x  subject to rows and lower <= x <= upper.
struct LinearProgram {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<LinearRow> rows;
    Eigen::VectorXd objective; // empty: feasibility only

    Eigen::Index variable_count() const { return lower.size(); }
    Eigen::Index add_variable(double lo, double hi);
    void add_row(std::vector<std::pair<Eigen::Index, double>> terms, RowSense sense, double rhs);
};

enum class LPStatus { Feasible, Infeasible };

struct LPResult {
    LPStatus status = LPStatus::Infeasible;
    Eigen::VectorXd assignment;
    double objective = 0.0;

    bool feasible() const { return status == LPStatus::Feasible; }
};

/// Dense bounded-variable primal simplex with Bland's rule.
///
/// Phase one runs once, on the first call that needs a feasible basis. Later
/// calls to minimize() restart phase two from the last optimal basis, so a
/// sequence of objectives over the same polytope (bound tightening) costs a
/// few pivots each.
class Simplex {
public:
    explicit Simplex(const LinearProgram& lp);

    bool feasible();
    /// Throws LPError if the polytope is empty; check feasible() first.
    LPResult minimize(const Eigen::VectorXd& objective);
    LPResult maximize(const Eigen::VectorXd& objective);

    std::size_t pivots() const { return pivots_; }

private:
    enum class Position : unsigned char { Basic, AtLower, AtUpper };

    void optimize(const Eigen::VectorXd& cost);
    void pivot(Eigen::Index row, Eigen::Index col);
    LPResult result(const Eigen::VectorXd& objective) const;

    Eigen::Index structurals_;
    Eigen::Index rows_;
    Eigen::Index columns_;
    Eigen::Index first_artificial_;
    Eigen::MatrixXd tableau_; // B^-1 A
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
    Eigen::VectorXd value_;
    std::vector<Eigen::Index> basis_; // row -> column
    std::vector<Position> position_;
    std::size_t pivots_ = 0;
    std::size_t iteration_cap_;
    int phase_one_ = -1; // -1 not run, 0 infeasible, 1 feasible
};

/// One-shot solve. Deterministic for identical input.
LPResult solve_lp(const LinearProgram& lp);

} // namespace babrl
