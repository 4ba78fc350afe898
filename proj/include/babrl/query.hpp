#pragma once

#include "babrl/model.hpp"

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace babrl {

/// Box membership slack for witnesses.
inline constexpr double kBoxTolerance = 1e-6;
/// Output-constraint slack for witnesses and exact-ReLU checks.
inline constexpr double kOutputTolerance = 1e-6;

class QueryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// coeffs . y <= rhs
struct OutputConstraint {
    Eigen::VectorXd coeffs;
    double rhs = 0.0;
};

/// Is there an x in [lower, upper] whose output satisfies every constraint?
/// SAT means the undesirable behavior exists.
struct Query {
    Eigen::VectorXd input_lower;
    Eigen::VectorXd input_upper;
    std::vector<OutputConstraint> constraints;
    std::string label;

    /// Throws QueryError if the box is empty or there is no constraint.
    void validate(const Network& net) const;
};

enum class Outcome { Sat, Unsat, Timeout, Error };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct Verdict {
    Outcome outcome = Outcome::Error;
    Eigen::VectorXd witness; // only for Sat
    std::uint64_t iterations = 0;
    std::uint64_t splits = 0;
    std::chrono::milliseconds wall_time{0};
    std::string message; // diagnostics for Error
};

/// Parses the line-based property format:
///   in <i> >= <v>
///   in <i> <= <v>
///   out <c0> ... <c_{m-1}> <= <d>
///   normalize            (bounds are raw values, mapped through the NNet normalization)
///   label <text>
/// Blank lines and lines starting with '#' are ignored. Unstated bounds default to
/// the network's input box.
Query parse_property(std::istream& in, const Network& net);
Query parse_property_text(const std::string& text, const Network& net);
Query parse_property_file(const std::string& path, const Network& net);
void write_property(const Query& q, std::ostream& out);

enum class Comparator { Argmax, Argmin };

std::string to_string(Comparator c);
Comparator comparator_from_string(const std::string& s);

/// One query per adversarial label j != t; SAT on any member means x0 is not
/// robust at radius delta. Throws QueryError on delta <= 0 or a tie at x0.
std::vector<Query> make_robustness_queries(const Network& net, const Eigen::VectorXd& x0, double delta,
                                           Comparator comparator);

struct ManifestRow {
    Eigen::VectorXd x0;
    std::vector<double> deltas;
    std::size_t line = 0;
};

/// Rows of `x0 values ; delta [delta...]`, values separated by spaces or commas.
std::vector<ManifestRow> parse_robustness_manifest(std::istream& in);
std::vector<ManifestRow> parse_robustness_manifest_file(const std::string& path);

bool check_witness(const Network& net, const Query& q, const Eigen::VectorXd& x);

/// A query bound to the network it is posed on.
struct Instance {
    std::string id;
    std::shared_ptr<const Network> net;
    Query query;
};

} // namespace babrl
