#pragma once

#include "babrl/search.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace babrl::harness {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SuiteConfig {
    std::vector<std::string> networks;
    std::vector<std::string> properties;
    std::string robust_manifest;
    Comparator comparator = Comparator::Argmax;
    std::string index; // suite index written by write_suite
    std::vector<StrategyKind> strategies;
    std::string checkpoint; // required when strategies include agent
    Budget budget;
    std::size_t workers = 1;
    std::string output_dir;
    bool lp_tightening = true;

    /// Throws ConfigError when there is no query source or no strategy.
    void validate() const;
};

/// Key-value text, one `key = value` per line, '#' comments. List values are
/// whitespace separated. Keys: networks, properties, robust_manifest,
/// comparator, index, strategies, checkpoint, timeout_s, max_iterations, seed,
/// workers, output, lp_tightening. Relative paths resolve against `base_dir`.
SuiteConfig parse_suite_config(std::istream& in, const std::string& base_dir = "");
SuiteConfig load_suite_config(const std::string& path);

struct RunRecord {
    std::string query_id;
    std::string strategy;
    Outcome verdict = Outcome::Error;
    std::int64_t wall_time_ms = 0;
    std::uint64_t iterations = 0;
    std::uint64_t splits = 0;
    std::uint64_t seed = 0;
    std::string checkpoint;
    // not part of the CSV
    Eigen::VectorXd witness;
    std::string message;
};

/// A query to run, or the reason it could not be built.
struct SuiteQuery {
    std::string id;
    std::optional<Instance> instance;
    std::string error;
};

/// Networks paired with properties (one-to-one, or broadcast when either list
/// has a single entry), robustness queries for every network and manifest row,
/// and the entries of `index`. Unreadable inputs become SuiteQuery errors.
std::vector<SuiteQuery> collect_queries(const SuiteConfig& config);

inline constexpr int kCsvVersion = 1;

void write_csv_header(std::ostream& out);
void write_csv_row(const RunRecord& r, std::ostream& out);
void write_csv(const std::vector<RunRecord>& records, std::ostream& out);
std::vector<RunRecord> read_csv(std::istream& in);
std::vector<RunRecord> read_csv_file(const std::string& path);

/// Runs every (query, strategy) pair on a pool of `workers` threads. Rows are
/// appended to `csv_path` as jobs finish; the file is then rewritten in job
/// order. A job that throws becomes an ERROR row. Empty `csv_path` skips the file.
std::vector<RunRecord> run_jobs(const std::vector<SuiteQuery>& queries, const std::vector<StrategyKind>& strategies,
                                const Budget& budget, std::size_t workers, bool lp_tightening,
                                const std::string& checkpoint = "", const std::string& csv_path = "");

/// collect_queries + run_jobs, writing <output_dir>/results.csv when set.
std::vector<RunRecord> run_suite(const SuiteConfig& config);

} // namespace babrl::harness
