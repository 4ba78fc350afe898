#include "babrl/numeric/simplex.hpp"

#include <cmath>
#include <string>

namespace babrl {

namespace {

constexpr double kPivotTolerance = 1e-9;
constexpr double kCostTolerance = 1e-9;

} // namespace

Eigen::Index LinearProgram::add_variable(double lo, double hi)
{
    const Eigen::Index n = lower.size();
    lower.conservativeResize(n + 1);
    upper.conservativeResize(n + 1);
    lower[n] = lo;
    upper[n] = hi;
    return n;
}

void LinearProgram::add_row(std::vector<std::pair<Eigen::Index, double>> terms, RowSense sense, double rhs)
{
    rows.push_back({std::move(terms), sense, rhs});
}

Simplex::Simplex(const LinearProgram& lp)
    : structurals_(lp.variable_count()), rows_(static_cast<Eigen::Index>(lp.rows.size()))
{
    if (lp.upper.size() != structurals_)
        throw LPError("bound vectors differ in length");
    for (Eigen::Index j = 0; j < structurals_; ++j) {
        if (!std::isfinite(lp.lower[j]) || !std::isfinite(lp.upper[j]))
            throw LPError("variable " + std::to_string(j) + " has an infinite bound");
        if (lp.lower[j] > lp.upper[j])
            phase_one_ = 0;
    }

    // Columns: structurals, one slack per inequality, one artificial per row.
    Eigen::Index slacks = 0;
    for (const auto& row : lp.rows)
        if (row.sense != RowSense::Equal)
            ++slacks;
    first_artificial_ = structurals_ + slacks;
    columns_ = first_artificial_ + rows_;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows_, columns_);
    lower_ = Eigen::VectorXd::Zero(columns_);
    upper_ = Eigen::VectorXd::Constant(columns_, kInfinity);
    value_ = Eigen::VectorXd::Zero(columns_);
    position_.assign(static_cast<std::size_t>(columns_), Position::AtLower);
    lower_.head(structurals_) = lp.lower;
    upper_.head(structurals_) = lp.upper;
    value_.head(structurals_) = lp.lower;

    basis_.assign(static_cast<std::size_t>(rows_), 0);
    Eigen::Index slack = structurals_;
    for (Eigen::Index i = 0; i < rows_; ++i) {
        const auto& row = lp.rows[static_cast<std::size_t>(i)];
        double residual = row.rhs;
        for (const auto& [j, c] : row.terms) {
            if (j < 0 || j >= structurals_)
                throw LPError("row references an unknown variable");
            a(i, j) += c;
        }
        for (const auto& [j, c] : row.terms)
            residual -= c * value_[j];

        Eigen::Index basic = -1;
        double basic_coeff = 1.0;
        if (row.sense != RowSense::Equal) {
            const double coeff = row.sense == RowSense::LessEqual ? 1.0 : -1.0;
            a(i, slack) = coeff;
            if (residual * coeff >= 0) {
                basic = slack;
                basic_coeff = coeff;
                value_[slack] = residual * coeff;
            }
            ++slack;
        }
        const Eigen::Index art = first_artificial_ + i;
        const double art_coeff = residual >= 0 ? 1.0 : -1.0;
        a(i, art) = art_coeff;
        if (basic < 0) {
            basic = art;
            basic_coeff = art_coeff;
            value_[art] = std::abs(residual);
        } else {
            upper_[art] = 0.0; // never needed
        }
        basis_[static_cast<std::size_t>(i)] = basic;
        position_[static_cast<std::size_t>(basic)] = Position::Basic;
        a.row(i) /= basic_coeff;
    }
    tableau_ = std::move(a);
    iteration_cap_ = 50 * static_cast<std::size_t>(structurals_ + rows_) + 50;
}

void Simplex::pivot(Eigen::Index row, Eigen::Index col)
{
    const double p = tableau_(row, col);
    tableau_.row(row) /= p;
    Eigen::VectorXd column = tableau_.col(col);
    column[row] = 0.0;
    tableau_.noalias() -= column * tableau_.row(row);
    tableau_(row, col) = 1.0;
    for (Eigen::Index i = 0; i < rows_; ++i)
        if (i != row)
            tableau_(i, col) = 0.0;

    basis_[static_cast<std::size_t>(row)] = col;
    position_[static_cast<std::size_t>(col)] = Position::Basic;
    ++pivots_;
}

void Simplex::optimize(const Eigen::VectorXd& cost)
{
    Eigen::VectorXd cost_basic(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i)
        cost_basic[i] = cost[basis_[static_cast<std::size_t>(i)]];
    Eigen::VectorXd reduced = cost - tableau_.transpose() * cost_basic;

    std::size_t steps = 0;
    while (true) {
        if (++steps > iteration_cap_)
            throw LPError("simplex iteration cap exceeded (" + std::to_string(iteration_cap_) + ")");

        // Bland: lowest-index improving column.
        Eigen::Index enter = -1;
        double dir = 0.0;
        for (Eigen::Index j = 0; j < columns_; ++j) {
            const auto pos = position_[static_cast<std::size_t>(j)];
            if (pos == Position::Basic || upper_[j] - lower_[j] <= 0.0)
                continue;
            if (pos == Position::AtLower && reduced[j] < -kCostTolerance) {
                enter = j;
                dir = 1.0;
                break;
            }
            if (pos == Position::AtUpper && reduced[j] > kCostTolerance) {
                enter = j;
                dir = -1.0;
                break;
            }
        }
        if (enter < 0)
            return;

        // Ratio test; ties go to the lowest basic column index.
        double step = upper_[enter] - lower_[enter];
        Eigen::Index leave_row = -1;
        bool leave_to_lower = true;
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const double alpha = tableau_(i, enter) * dir;
            const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
            double limit;
            bool to_lower;
            if (alpha > kPivotTolerance) {
                if (!std::isfinite(lower_[b]))
                    continue;
                limit = (value_[b] - lower_[b]) / alpha;
                to_lower = true;
            } else if (alpha < -kPivotTolerance) {
                if (!std::isfinite(upper_[b]))
                    continue;
                limit = (upper_[b] - value_[b]) / -alpha;
                to_lower = false;
            } else {
                continue;
            }
            limit = std::max(limit, 0.0);
            if (limit < step ||
                (limit == step && leave_row >= 0 && b < basis_[static_cast<std::size_t>(leave_row)])) {
                step = limit;
                leave_row = i;
                leave_to_lower = to_lower;
            }
        }
        if (!std::isfinite(step))
            throw LPError("unbounded objective");

        value_[enter] += dir * step;
        for (Eigen::Index i = 0; i < rows_; ++i)
            value_[basis_[static_cast<std::size_t>(i)]] -= tableau_(i, enter) * dir * step;

        if (leave_row < 0) {
            // Bound flip, basis unchanged.
            auto& pos = position_[static_cast<std::size_t>(enter)];
            pos = dir > 0 ? Position::AtUpper : Position::AtLower;
            value_[enter] = dir > 0 ? upper_[enter] : lower_[enter];
            continue;
        }

        const Eigen::Index leaving = basis_[static_cast<std::size_t>(leave_row)];
        pivot(leave_row, enter);
        position_[static_cast<std::size_t>(leaving)] = leave_to_lower ? Position::AtLower : Position::AtUpper;
        value_[leaving] = leave_to_lower ? lower_[leaving] : upper_[leaving];
        const double d = reduced[enter];
        reduced.noalias() -= d * tableau_.row(leave_row).transpose();
        reduced[enter] = 0.0;
    }
}

bool Simplex::feasible()
{
    if (phase_one_ >= 0)
        return phase_one_ == 1;
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(columns_);
    cost.tail(rows_).setOnes();
    optimize(cost);
    const double infeasibility = value_.tail(rows_).sum();
    phase_one_ = infeasibility <= kLpTolerance ? 1 : 0;
    if (phase_one_ == 1) {
        // Pin artificials at zero; basic ones leave on the next pivot through them.
        for (Eigen::Index j = first_artificial_; j < columns_; ++j) {
            upper_[j] = 0.0;
            if (position_[static_cast<std::size_t>(j)] != Position::Basic) {
                position_[static_cast<std::size_t>(j)] = Position::AtLower;
                value_[j] = 0.0;
            }
        }
    }
    return phase_one_ == 1;
}

LPResult Simplex::result(const Eigen::VectorXd& objective) const
{
    LPResult r;
    r.status = LPStatus::Feasible;
    r.assignment = value_.head(structurals_);
    // Basic values drift by rounding; report them inside their box.
    r.assignment = r.assignment.cwiseMax(lower_.head(structurals_)).cwiseMin(upper_.head(structurals_));
    r.objective = objective.size() ? objective.dot(r.assignment) : 0.0;
    return r;
}

LPResult Simplex::minimize(const Eigen::VectorXd& objective)
{
    if (!feasible())
        throw LPError("minimize called on an infeasible program");
    if (objective.size() == 0)
        return result(objective);
    if (objective.size() != structurals_)
        throw LPError("objective length does not match variable count");
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(columns_);
    cost.head(structurals_) = objective;
    optimize(cost);
    return result(objective);
}

LPResult Simplex::maximize(const Eigen::VectorXd& objective)
{
    LPResult r = minimize(-objective);
    r.objective = -r.objective;
    return r;
}

LPResult solve_lp(const LinearProgram& lp)
{
    Simplex s(lp);
    if (!s.feasible())
        return {};
    return s.minimize(lp.objective);
}

} // namespace babrl
