#include "babrl/harness/oracle.hpp"

#include "babrl/numeric/simplex.hpp"

#include <chrono>
#include <limits>

namespace babrl::harness {

namespace {

struct PatternLp {
    LinearProgram lp;       // variables: the inputs only
    Eigen::MatrixXd out_m;  // y = out_m x + out_d
    Eigen::VectorXd out_d;
};

PatternLp pattern_lp(const Network& net, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const PhaseMap& phases)
{
    PatternLp p;
    const Eigen::Index n = net.input_dim();
    for (Eigen::Index i = 0; i < n; ++i)
        p.lp.add_variable(lower[i], upper[i]);

    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    std::size_t bit = 0;
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
        const Layer& l = net.layer(k);
        Eigen::MatrixXd zm = l.weights * m;
        Eigen::VectorXd zd = l.weights * d + l.bias;
        if (l.relu) {
            for (Eigen::Index i = 0; i < zm.rows(); ++i, ++bit) {
                const bool active = phases[bit] == Phase::Active;
                std::vector<std::pair<Eigen::Index, double>> terms;
                for (Eigen::Index j = 0; j < n; ++j)
                    terms.emplace_back(j, zm(i, j));
                // active: z >= 0; inactive: z <= 0
                p.lp.add_row(terms, active ? RowSense::GreaterEqual : RowSense::LessEqual, -zd[i]);
                if (!active) {
                    zm.row(i).setZero();
                    zd[i] = 0.0;
                }
            }
        }
        m = std::move(zm);
        d = std::move(zd);
    }
    p.out_m = std::move(m);
    p.out_d = std::move(d);
    return p;
}

void add_output_rows(PatternLp& p, const std::vector<OutputConstraint>& constraints)
{
    for (const auto& c : constraints) {
        const Eigen::VectorXd row = p.out_m.transpose() * c.coeffs;
        std::vector<std::pair<Eigen::Index, double>> terms;
        for (Eigen::Index j = 0; j < row.size(); ++j)
            terms.emplace_back(j, row[j]);
        p.lp.add_row(terms, RowSense::LessEqual, c.rhs - c.coeffs.dot(p.out_d));
    }
}

void guard(const Network& net)
{
    if (net.relu_count() > kOracleReluGuard)
        throw OracleError("brute-force oracle refuses " + std::to_string(net.relu_count()) + " ReLUs (limit " +
                          std::to_string(kOracleReluGuard) + ")");
}

PhaseMap phases_of(std::size_t mask, std::size_t relus)
{
    PhaseMap ph(relus);
    for (std::size_t b = 0; b < relus; ++b)
        ph[b] = (mask >> (relus - 1 - b)) & 1U ? Phase::Active : Phase::Inactive;
    return ph;
}

} // namespace

std::vector<PatternResult> enumerate_patterns(const Network& net, const Query& q, bool stop_at_sat)
{
    guard(net);
    q.validate(net);
    const std::size_t relus = net.relu_count();
    std::vector<PatternResult> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << relus); ++mask) {
        PatternResult r;
        r.phases = phases_of(mask, relus);
        PatternLp p = pattern_lp(net, q.input_lower, q.input_upper, r.phases);
        r.region_feasible = Simplex(p.lp).feasible();
        if (r.region_feasible) {
            add_output_rows(p, q.constraints);
            Simplex s(p.lp);
            if (s.feasible()) {
                r.property_feasible = true;
                r.witness = s.minimize(Eigen::VectorXd::Zero(net.input_dim())).assignment;
            }
        }
        out.push_back(std::move(r));
        if (stop_at_sat && out.back().property_feasible)
            break;
    }
    return out;
}

Verdict brute_force_verify(const Network& net, const Query& q)
{
    const auto start = std::chrono::steady_clock::now();
    const auto patterns = enumerate_patterns(net, q, true);
    Verdict v;
    v.iterations = patterns.size();
    v.outcome = Outcome::Unsat;
    if (!patterns.empty() && patterns.back().property_feasible) {
        v.outcome = Outcome::Sat;
        v.witness = patterns.back().witness;
    }
    v.wall_time =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return v;
}

double brute_force_minimum(const Network& net, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                           const Eigen::VectorXd& c)
{
    guard(net);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 0; mask < (std::size_t{1} << net.relu_count()); ++mask) {
        const PatternLp p = pattern_lp(net, lower, upper, phases_of(mask, net.relu_count()));
        Simplex s(p.lp);
        if (!s.feasible())
            continue;
        const Eigen::VectorXd obj = p.out_m.transpose() * c;
        best = std::min(best, s.minimize(obj).objective + c.dot(p.out_d));
    }
    return best;
}

double local_minimum(const Network& net, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                     const Eigen::VectorXd& c, Eigen::VectorXd x, int max_rounds)
{
    double best = c.dot(evaluate(net, x));
    for (int round = 0; round < max_rounds; ++round) {
        PhaseMap phases;
        const auto pre = pre_activations(net, x);
        for (std::size_t k = 0; k < net.layer_count(); ++k)
            if (net.layer(k).relu)
                for (Eigen::Index i = 0; i < pre[k].size(); ++i)
                    phases.push_back(pre[k][i] >= 0.0 ? Phase::Active : Phase::Inactive);
        const PatternLp p = pattern_lp(net, lower, upper, phases);
        Simplex s(p.lp);
        if (!s.feasible())
            break;
        const auto sol = s.minimize(p.out_m.transpose() * c);
        const double value = c.dot(evaluate(net, sol.assignment));
        if (!(value < best - 1e-12))
            break;
        best = value;
        x = sol.assignment;
    }
    return best;
}

} // namespace babrl::harness
