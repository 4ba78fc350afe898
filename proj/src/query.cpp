#include "babrl/query.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace babrl {

void Query::validate(const Network& net) const
{
    if (input_lower.size() != net.input_dim() || input_upper.size() != net.input_dim())
        throw QueryError("query box dimension does not match network input");
    for (Eigen::Index i = 0; i < input_lower.size(); ++i)
        if (!(input_lower[i] <= input_upper[i]))
            throw QueryError("empty input box at coordinate " + std::to_string(i));
    if (constraints.empty())
        throw QueryError("query has no output constraint");
    for (const auto& c : constraints)
        if (c.coeffs.size() != net.output_dim())
            throw QueryError("output constraint width does not match network output");
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::Sat: return "SAT";
    case Outcome::Unsat: return "UNSAT";
    case Outcome::Timeout: return "TIMEOUT";
    case Outcome::Error: return "ERROR";
    }
    return "ERROR";
}

Outcome outcome_from_string(const std::string& s)
{
    if (s == "SAT") return Outcome::Sat;
    if (s == "UNSAT") return Outcome::Unsat;
    if (s == "TIMEOUT") return Outcome::Timeout;
    if (s == "ERROR") return Outcome::Error;
    throw QueryError("unknown verdict '" + s + "'");
}

namespace {

double parse_number(const std::string& tok, std::size_t line)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw QueryError("line " + std::to_string(line) + ": expected a number, got '" + tok + "'");
    }
}

std::vector<std::string> split_ws(const std::string& s)
{
    std::istringstream ss(s);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

} // namespace

Query parse_property(std::istream& in, const Network& net)
{
    Query q;
    q.input_lower = net.input_lower();
    q.input_upper = net.input_upper();

    struct Bound {
        Eigen::Index index;
        bool lower;
        double value;
        std::size_t line;
    };
    std::vector<Bound> bounds;
    bool normalize = false;

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        const auto toks = split_ws(text);
        if (toks.empty() || toks[0][0] == '#')
            continue;
        const std::string& kw = toks[0];
        const std::string where = "line " + std::to_string(line) + ": ";
        if (kw == "in") {
            if (toks.size() != 4 || (toks[2] != ">=" && toks[2] != "<="))
                throw QueryError(where + "expected 'in <i> >=|<= <value>'");
            const double idx = parse_number(toks[1], line);
            if (idx < 0 || idx >= static_cast<double>(net.input_dim()) || idx != std::floor(idx))
                throw QueryError(where + "input index out of range");
            bounds.push_back({static_cast<Eigen::Index>(idx), toks[2] == ">=", parse_number(toks[3], line), line});
        } else if (kw == "out") {
            const auto m = static_cast<std::size_t>(net.output_dim());
            if (toks.size() != m + 3 || toks[m + 1] != "<=")
                throw QueryError(where + "expected 'out' followed by " + std::to_string(m) +
                                 " coefficients, '<=' and a bound");
            OutputConstraint c;
            c.coeffs.resize(static_cast<Eigen::Index>(m));
            for (std::size_t j = 0; j < m; ++j)
                c.coeffs[static_cast<Eigen::Index>(j)] = parse_number(toks[j + 1], line);
            c.rhs = parse_number(toks[m + 2], line);
            q.constraints.push_back(std::move(c));
        } else if (kw == "normalize") {
            if (!net.normalization())
                throw QueryError(where + "network carries no normalization constants");
            normalize = true;
        } else if (kw == "label") {
            q.label = text.substr(text.find("label") + 5);
            q.label.erase(0, q.label.find_first_not_of(" \t"));
        } else {
            throw QueryError(where + "unknown keyword '" + kw + "'");
        }
    }

    if (normalize) {
        // The NNet box is stated in raw units as well.
        const auto& n = *net.normalization();
        q.input_lower = (q.input_lower - n.input_mean).cwiseQuotient(n.input_range);
        q.input_upper = (q.input_upper - n.input_mean).cwiseQuotient(n.input_range);
    }
    for (const auto& b : bounds) {
        double v = b.value;
        if (normalize) {
            const auto& n = *net.normalization();
            v = (v - n.input_mean[b.index]) / n.input_range[b.index];
        }
        if (b.lower)
            q.input_lower[b.index] = std::max(q.input_lower[b.index], v);
        else
            q.input_upper[b.index] = std::min(q.input_upper[b.index], v);
        if (q.input_lower[b.index] > q.input_upper[b.index])
            throw QueryError("line " + std::to_string(b.line) + ": empty input box at coordinate " +
                             std::to_string(b.index));
    }
    if (normalize) {
        // c.(y*r + m) <= d  <=>  (c*r).y <= d - (c.1)*m
        const auto& n = *net.normalization();
        for (auto& c : q.constraints) {
            c.rhs -= c.coeffs.sum() * n.output_mean;
            c.coeffs *= n.output_range;
        }
    }
    if (q.constraints.empty())
        throw QueryError("property has no 'out' constraint");
    q.validate(net);
    return q;
}

Query parse_property_text(const std::string& text, const Network& net)
{
    std::istringstream in(text);
    return parse_property(in, net);
}

Query parse_property_file(const std::string& path, const Network& net)
{
    std::ifstream in(path);
    if (!in)
        throw QueryError("cannot open property file " + path);
    Query q = parse_property(in, net);
    if (q.label.empty())
        q.label = path;
    return q;
}

void write_property(const Query& q, std::ostream& out)
{
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    if (!q.label.empty())
        out << "label " << q.label << "\n";
    for (Eigen::Index i = 0; i < q.input_lower.size(); ++i) {
        out << "in " << i << " >= " << q.input_lower[i] << "\n";
        out << "in " << i << " <= " << q.input_upper[i] << "\n";
    }
    for (const auto& c : q.constraints) {
        out << "out";
        for (Eigen::Index j = 0; j < c.coeffs.size(); ++j)
            out << " " << c.coeffs[j];
        out << " <= " << c.rhs << "\n";
    }
    out.flags(flags);
    out.precision(prec);
}

std::string to_string(Comparator c)
{
    return c == Comparator::Argmax ? "argmax" : "argmin";
}

Comparator comparator_from_string(const std::string& s)
{
    if (s == "argmax") return Comparator::Argmax;
    if (s == "argmin") return Comparator::Argmin;
    throw QueryError("unknown comparator '" + s + "'");
}

std::vector<Query> make_robustness_queries(const Network& net, const Eigen::VectorXd& x0, double delta,
                                           Comparator comparator)
{
    if (!(delta > 0))
        throw QueryError("robustness radius must be positive");
    if (x0.size() != net.input_dim())
        throw QueryError("robustness centre has wrong dimension");
    const Eigen::VectorXd y = evaluate(net, x0);
    const Eigen::Index m = y.size();
    if (m < 2)
        throw QueryError("robustness needs at least two outputs");

    Eigen::Index t = 0;
    for (Eigen::Index j = 1; j < m; ++j)
        if (comparator == Comparator::Argmax ? y[j] > y[t] : y[j] < y[t])
            t = j;
    for (Eigen::Index j = 0; j < m; ++j)
        if (j != t && std::abs(y[j] - y[t]) <= kOutputTolerance)
            throw QueryError("tie at x0 between outputs " + std::to_string(t) + " and " + std::to_string(j));

    Eigen::VectorXd lo = (x0.array() - delta).max(net.input_lower().array());
    Eigen::VectorXd hi = (x0.array() + delta).min(net.input_upper().array());
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (lo[i] > hi[i])
            throw QueryError("robustness ball does not meet the input box");

    std::ostringstream centre;
    centre << std::setprecision(6);
    for (Eigen::Index i = 0; i < x0.size(); ++i)
        centre << (i ? "," : "") << x0[i];

    std::vector<Query> out;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (j == t)
            continue;
        OutputConstraint c;
        c.coeffs = Eigen::VectorXd::Zero(m);
        // argmax: label j beats t when y_t - y_j <= 0; argmin mirrors it
        const double sign = comparator == Comparator::Argmax ? 1.0 : -1.0;
        c.coeffs[t] = sign;
        c.coeffs[j] = -sign;
        c.rhs = 0.0;
        Query q{lo, hi, {c}, {}};
        q.label = "robust[" + centre.str() + "];d=" + std::to_string(delta) + ";" + to_string(comparator) +
                  ";t=" + std::to_string(t) + ";j=" + std::to_string(j);
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<ManifestRow> parse_robustness_manifest(std::istream& in)
{
    std::vector<ManifestRow> rows;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        const auto first = text.find_first_not_of(" \t\r");
        if (first == std::string::npos || text[first] == '#')
            continue;
        const auto semi = text.find(';');
        if (semi == std::string::npos)
            throw QueryError("manifest line " + std::to_string(line) + ": missing ';' before delta");
        auto numbers = [&](std::string s) {
            std::replace(s.begin(), s.end(), ',', ' ');
            std::vector<double> v;
            for (const auto& tok : split_ws(s))
                v.push_back(parse_number(tok, line));
            return v;
        };
        const auto xs = numbers(text.substr(0, semi));
        ManifestRow row;
        row.line = line;
        row.deltas = numbers(text.substr(semi + 1));
        if (xs.empty() || row.deltas.empty())
            throw QueryError("manifest line " + std::to_string(line) + ": needs a point and at least one delta");
        row.x0 = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ManifestRow> parse_robustness_manifest_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw QueryError("cannot open manifest " + path);
    return parse_robustness_manifest(in);
}

bool check_witness(const Network& net, const Query& q, const Eigen::VectorXd& x)
{
    if (x.size() != net.input_dim())
        return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]))
            return false;
        if (x[i] < q.input_lower[i] - kBoxTolerance || x[i] > q.input_upper[i] + kBoxTolerance)
            return false;
    }
    const Eigen::VectorXd y = evaluate(net, x);
    for (const auto& c : q.constraints)
        if (c.coeffs.dot(y) > c.rhs + kOutputTolerance)
            return false;
    return true;
}

} // namespace babrl
