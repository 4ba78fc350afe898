#include "babrl/harness/report.hpp"

#include <algorithm>
#include <ostream>
#include <set>

namespace babrl::harness {

namespace {

bool solved(Outcome o)
{
    return o == Outcome::Sat || o == Outcome::Unsat;
}

std::vector<std::string> strategy_order(const std::vector<RunRecord>& records)
{
    std::vector<std::string> order;
    for (const auto& r : records)
        if (std::find(order.begin(), order.end(), r.strategy) == order.end())
            order.push_back(r.strategy);
    return order;
}

// queries for which every strategy has a record satisfying `keep`
template <typename Keep>
std::set<std::string> common_queries(const std::vector<RunRecord>& records, const std::vector<std::string>& order,
                                     Keep keep)
{
    std::map<std::string, std::set<std::string>> by_query;
    for (const auto& r : records)
        if (keep(r))
            by_query[r.query_id].insert(r.strategy);
    std::set<std::string> out;
    for (const auto& [q, s] : by_query)
        if (s.size() == order.size())
            out.insert(q);
    return out;
}

} // namespace

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records, double budget_ms)
{
    const auto order = strategy_order(records);
    const auto common = common_queries(records, order, [](const RunRecord&) { return true; });
    std::vector<SummaryRow> rows;
    for (const auto& name : order) {
        SummaryRow row;
        row.strategy = name;
        row.common = common.size();
        double time = 0.0;
        double iters = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            if (r.strategy != name)
                continue;
            switch (r.verdict) {
            case Outcome::Sat: ++row.sat; break;
            case Outcome::Unsat: ++row.unsat; break;
            case Outcome::Timeout: ++row.timeout; break;
            case Outcome::Error: ++row.error; break;
            }
            if (!common.count(r.query_id))
                continue;
            time += solved(r.verdict) ? static_cast<double>(r.wall_time_ms) : budget_ms;
            iters += static_cast<double>(r.iterations);
            ++n;
        }
        if (n > 0) {
            row.avg_time_ms = time / static_cast<double>(n);
            row.avg_iterations = iters / static_cast<double>(n);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::pair<double, std::size_t>> cumulative_curve(const std::vector<RunRecord>& records,
                                                             const std::string& strategy)
{
    std::vector<double> times;
    for (const auto& r : records)
        if (r.strategy == strategy && solved(r.verdict))
            times.push_back(static_cast<double>(r.wall_time_ms));
    std::sort(times.begin(), times.end());
    std::vector<std::pair<double, std::size_t>> curve;
    for (std::size_t i = 0; i < times.size(); ++i)
        curve.emplace_back(times[i], i + 1);
    return curve;
}

CommonSolved common_solved_iterations(const std::vector<RunRecord>& records)
{
    const auto order = strategy_order(records);
    const auto common = common_queries(records, order, [](const RunRecord& r) { return solved(r.verdict); });
    CommonSolved out;
    out.queries = common.size();
    for (const auto& name : order) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : records)
            if (r.strategy == name && solved(r.verdict) && common.count(r.query_id)) {
                sum += static_cast<double>(r.iterations);
                ++n;
            }
        out.avg_iterations[name] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
    return out;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out)
{
    out << "strategy,sat,unsat,timeout,error,common,avg_time_ms,avg_iterations\n";
    for (const auto& r : rows)
        out << r.strategy << "," << r.sat << "," << r.unsat << "," << r.timeout << "," << r.error << "," << r.common
            << "," << r.avg_time_ms << "," << r.avg_iterations << "\n";
}

void write_curve_csv(const std::vector<std::pair<double, std::size_t>>& curve, std::ostream& out)
{
    out << "time_ms,solved\n";
    for (const auto& [t, n] : curve)
        out << t << "," << n << "\n";
}

} // namespace babrl::harness
