#pragma once

#include "babrl/harness/suite.hpp"

#include <iosfwd>
#include <map>
#include <utility>

namespace babrl::harness {

struct SummaryRow {
    std::string strategy;
    std::size_t sat = 0;
    std::size_t unsat = 0;
    std::size_t timeout = 0;
    std::size_t error = 0;
    std::size_t common = 0; // queries attempted by every strategy
    double avg_time_ms = 0.0;
    double avg_iterations = 0.0;

    std::size_t solved() const { return sat + unsat; }
    std::size_t total() const { return sat + unsat + timeout + error; }
};

/// Per strategy, in order of first appearance. Counts cover all of a
/// strategy's records; averages cover the queries attempted by every strategy,
/// with TIMEOUT and ERROR rows timed at `budget_ms`.
std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records, double budget_ms);

/// Solve times ascending with the running solved count; timeouts and errors excluded.
std::vector<std::pair<double, std::size_t>> cumulative_curve(const std::vector<RunRecord>& records,
                                                             const std::string& strategy);

struct CommonSolved {
    std::size_t queries = 0; // solved by every strategy
    std::map<std::string, double> avg_iterations;
};

CommonSolved common_solved_iterations(const std::vector<RunRecord>& records);

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void write_curve_csv(const std::vector<std::pair<double, std::size_t>>& curve, std::ostream& out);

} // namespace babrl::harness
