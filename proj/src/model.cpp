#include "babrl/model.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace babrl {

std::string to_string(const NeuronId& id)
{
    return std::to_string(id.layer) + ":" + std::to_string(id.index);
}

NNetParseError::NNetParseError(std::size_t line, const std::string& what)
    : ModelError("line " + std::to_string(line) + ": " + what), line_(line)
{
}

std::vector<Eigen::VectorXd> pre_activations(const Network& net, const Eigen::VectorXd& x)
{
    if (x.size() != net.input_dim())
        throw ModelError("pre_activations: input dimension mismatch");
    std::vector<Eigen::VectorXd> out;
    out.reserve(net.layer_count());
    Eigen::VectorXd a = x;
    for (const auto& layer : net.layers()) {
        Eigen::VectorXd z = layer.weights * a + layer.bias;
        a = layer.relu ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
        out.push_back(std::move(z));
    }
    return out;
}

Network toy_network()
{
    Layer hidden;
    hidden.weights.resize(2, 2);
    hidden.weights << 2.0, 0.0,
                      1.0, -1.0;
    hidden.bias = Eigen::VectorXd::Zero(2);
    hidden.relu = true;

    Layer output;
    output.weights.resize(1, 2);
    output.weights << -1.0, 1.0;
    output.bias = Eigen::VectorXd::Zero(1);
    output.relu = false;

    Eigen::VectorXd lo(2), hi(2);
    lo << -1.0, 0.0;
    hi << 1.0, 1.0;
    return Network({hidden, output}, lo, hi);
}

namespace {

struct Row {
    std::size_t line;
    std::vector<double> values;
};

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<Row> read_rows(std::istream& in)
{
    std::vector<Row> rows;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        const std::string t = trim(text);
        if (t.empty() || t.rfind("//", 0) == 0)
            continue;
        Row row{line_no, {}};
        std::stringstream ss(t);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty())
                continue;
            double v = 0.0;
            // from_chars for double is available in libstdc++ 11
            const auto* first = tok.data();
            const auto* last = tok.data() + tok.size();
            if (*first == '+')
                ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last)
                throw NNetParseError(line_no, "non-numeric token '" + tok + "'");
            row.values.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

class RowCursor {
public:
    explicit RowCursor(std::vector<Row> rows) : rows_(std::move(rows)) {}

    const Row& next(const char* what)
    {
        if (pos_ >= rows_.size()) {
            const std::size_t line = rows_.empty() ? 0 : rows_.back().line + 1;
            throw NNetParseError(line, std::string("unexpected end of file while reading ") + what);
        }
        return rows_[pos_++];
    }

    const Row& expect(std::size_t count, const char* what)
    {
        const Row& row = next(what);
        if (row.values.size() != count)
            throw NNetParseError(row.line, std::string("dimension mismatch in ") + what + ": expected " +
                                               std::to_string(count) + " values, found " +
                                               std::to_string(row.values.size()));
        return row;
    }

    bool done() const { return pos_ >= rows_.size(); }
    std::size_t line() const { return pos_ < rows_.size() ? rows_[pos_].line : 0; }

private:
    std::vector<Row> rows_;
    std::size_t pos_ = 0;
};

std::size_t as_count(const Row& row, std::size_t i, const char* what)
{
    const double v = row.values.at(i);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw NNetParseError(row.line, std::string("malformed header: ") + what + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
}

} // namespace

Network load_nnet(std::istream& in)
{
    RowCursor cur(read_rows(in));

    const Row& head = cur.next("header");
    if (head.values.size() < 3)
        throw NNetParseError(head.line, "malformed header: expected layer count, input size, output size");
    const std::size_t n_layers = as_count(head, 0, "layer count");
    const std::size_t n_in = as_count(head, 1, "input size");
    const std::size_t n_out = as_count(head, 2, "output size");
    if (n_layers == 0 || n_in == 0 || n_out == 0)
        throw NNetParseError(head.line, "malformed header: zero-sized network");

    const Row& sizes_row = cur.expect(n_layers + 1, "layer sizes");
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i <= n_layers; ++i)
        sizes.push_back(as_count(sizes_row, i, "layer size"));
    if (sizes.front() != n_in || sizes.back() != n_out)
        throw NNetParseError(sizes_row.line, "dimension mismatch: layer sizes disagree with input/output size");

    cur.next("symmetric flag");
    const Row& mins = cur.expect(n_in, "input minimums");
    const Row& maxs = cur.expect(n_in, "input maximums");
    const Row& means = cur.expect(n_in + 1, "means");
    const Row& ranges = cur.expect(n_in + 1, "ranges");

    Eigen::VectorXd lo(static_cast<Eigen::Index>(n_in)), hi(static_cast<Eigen::Index>(n_in));
    Normalization norm;
    norm.input_mean.resize(static_cast<Eigen::Index>(n_in));
    norm.input_range.resize(static_cast<Eigen::Index>(n_in));
    for (std::size_t i = 0; i < n_in; ++i) {
        const auto e = static_cast<Eigen::Index>(i);
        lo[e] = mins.values[i];
        hi[e] = maxs.values[i];
        norm.input_mean[e] = means.values[i];
        norm.input_range[e] = ranges.values[i];
        if (lo[e] > hi[e])
            throw NNetParseError(mins.line, "input " + std::to_string(i) + ": minimum exceeds maximum");
    }
    norm.output_mean = means.values[n_in];
    norm.output_range = ranges.values[n_in];

    std::vector<Layer> layers;
    for (std::size_t k = 0; k < n_layers; ++k) {
        const auto rows = static_cast<Eigen::Index>(sizes[k + 1]);
        const auto cols = static_cast<Eigen::Index>(sizes[k]);
        Layer layer;
        layer.weights.resize(rows, cols);
        layer.bias.resize(rows);
        layer.relu = k + 1 < n_layers;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Row& row = cur.expect(sizes[k], "weight row");
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.weights(r, c) = row.values[static_cast<std::size_t>(c)];
        }
        for (Eigen::Index r = 0; r < rows; ++r)
            layer.bias[r] = cur.expect(1, "bias").values[0];
        layers.push_back(std::move(layer));
    }
    if (!cur.done())
        throw NNetParseError(cur.line(), "dimension mismatch: trailing values after last layer");

    return Network(std::move(layers), lo, hi, std::move(norm));
}

Network load_nnet_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ModelError("cannot open network file " + path);
    return load_nnet(in);
}

void emit_nnet(const Network& net, std::ostream& out)
{
    const auto n_in = net.input_dim();
    std::size_t max_size = static_cast<std::size_t>(n_in);
    for (const auto& l : net.layers())
        max_size = std::max(max_size, static_cast<std::size_t>(l.out_dim()));

    const auto old_flags = out.flags();
    const auto old_prec = out.precision();
    out << std::setprecision(17);
    out << "// babrl network\n";
    out << net.layer_count() << "," << n_in << "," << net.output_dim() << "," << max_size << ",\n";
    out << n_in << ",";
    for (const auto& l : net.layers())
        out << l.out_dim() << ",";
    out << "\n0,\n";

    auto write_vec = [&](const Eigen::VectorXd& v, std::optional<double> extra) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out << v[i] << ",";
        if (extra)
            out << *extra << ",";
        out << "\n";
    };
    write_vec(net.input_lower(), std::nullopt);
    write_vec(net.input_upper(), std::nullopt);
    if (const auto& norm = net.normalization()) {
        write_vec(norm->input_mean, norm->output_mean);
        write_vec(norm->input_range, norm->output_range);
    } else {
        write_vec(Eigen::VectorXd::Zero(n_in), 0.0);
        write_vec(Eigen::VectorXd::Ones(n_in), 1.0);
    }

    for (const auto& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
                out << l.weights(r, c) << ",";
            out << "\n";
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            out << l.bias[r] << ",\n";
    }
    out.flags(old_flags);
    out.precision(old_prec);
}

void emit_nnet_file(const Network& net, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ModelError("cannot write network file " + path);
    emit_nnet(net, out);
}

} // namespace babrl
