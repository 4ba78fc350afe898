#include "babrl/harness/generate.hpp"

#include "babrl/harness/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace babrl::harness {

namespace {

std::vector<int> hidden_sizes(std::mt19937_64& rng, int relus, int max_layers)
{
    std::uniform_int_distribution<int> layers(1, std::max(1, std::min(max_layers, relus / 2)));
    const int n = layers(rng);
    std::vector<int> sizes(static_cast<std::size_t>(n), relus / n);
    for (int i = 0; i < relus % n; ++i)
        ++sizes[static_cast<std::size_t>(i)];
    return sizes;
}

Network random_network(std::mt19937_64& rng, int inputs, const std::vector<int>& hidden)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Layer> layers;
    int prev = inputs;
    for (std::size_t k = 0; k <= hidden.size(); ++k) {
        const int out = k < hidden.size() ? hidden[k] : 1;
        Layer l{Eigen::MatrixXd(out, prev), Eigen::VectorXd(out), k < hidden.size()};
        for (Eigen::Index i = 0; i < l.weights.size(); ++i)
            l.weights.data()[i] = u(rng);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i)
            l.bias[i] = u(rng);
        layers.push_back(std::move(l));
        prev = out;
    }
    return Network(std::move(layers), -Eigen::VectorXd::Ones(inputs), Eigen::VectorXd::Ones(inputs));
}

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext)
{
    std::ostringstream s;
    s << stem << std::setw(3) << std::setfill('0') << i << ext;
    return s.str();
}

} // namespace

GeneratedSuite gen_random_suite(std::uint64_t seed, const GenSpec& spec)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> inputs(spec.min_inputs, spec.max_inputs);
    std::uniform_int_distribution<int> relus(spec.min_relus, spec.max_relus);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GeneratedSuite suite;
    std::size_t sat = 0;
    bool exact = true;
    for (std::size_t i = 0; i < spec.count; ++i) {
        const int n = inputs(rng);
        const int r = relus(rng);
        auto net = std::make_shared<Network>(random_network(rng, n, hidden_sizes(rng, r, spec.max_hidden_layers)));

        std::vector<std::pair<double, Eigen::VectorXd>> samples;
        samples.reserve(spec.samples);
        for (std::size_t k = 0; k < spec.samples; ++k) {
            Eigen::VectorXd x(n);
            for (int j = 0; j < n; ++j)
                x[j] = -1.0 + 2.0 * unit(rng);
            samples.emplace_back(evaluate(*net, x)[0], std::move(x));
        }
        std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        const double median = samples[samples.size() / 2].first;

        const Eigen::VectorXd c = Eigen::VectorXd::Ones(1);
        double minimum;
        if (net->relu_count() <= std::min(spec.exact_relu_limit, kOracleReluGuard)) {
            minimum = brute_force_minimum(*net, net->input_lower(), net->input_upper(), c);
        } else {
            // descend from the best few samples
            exact = false;
            minimum = samples.front().first;
            for (std::size_t k = 0; k < std::min<std::size_t>(8, samples.size()); ++k)
                minimum = std::min(minimum, local_minimum(*net, net->input_lower(), net->input_upper(), c,
                                                          samples[k].second));
        }
        const double s = spec.spread * (2.0 * unit(rng) - 1.0);
        const double scale = std::max(median - minimum, 1e-3);
        Query q;
        q.input_lower = net->input_lower();
        q.input_upper = net->input_upper();
        q.constraints = {{c, minimum + s * scale}};
        const std::string id = numbered("q", i, "");
        q.label = id;
        if (s >= 0.0)
            ++sat;
        suite.instances.push_back({id, std::move(net), std::move(q)});
    }
    suite.sat_fraction = exact && spec.count > 0 ? static_cast<double>(sat) / static_cast<double>(spec.count)
                                                 : std::numeric_limits<double>::quiet_NaN();
    return suite;
}

void write_suite(const GeneratedSuite& suite, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    std::ofstream index(std::filesystem::path(dir) / "index.txt");
    if (!index)
        throw std::runtime_error("cannot write suite index in " + dir);
    for (std::size_t i = 0; i < suite.instances.size(); ++i) {
        const Instance& inst = suite.instances[i];
        const std::string net = numbered("net_", i, ".nnet");
        const std::string prop = numbered("prop_", i, ".txt");
        emit_nnet_file(*inst.net, (std::filesystem::path(dir) / net).string());
        std::ofstream p(std::filesystem::path(dir) / prop);
        write_property(inst.query, p);
        index << inst.id << " " << net << " " << prop << "\n";
    }
}

std::vector<Instance> load_suite_index(const std::string& index_path)
{
    std::ifstream in(index_path);
    if (!in)
        throw std::runtime_error("cannot read suite index " + index_path);
    const auto base = std::filesystem::path(index_path).parent_path();
    std::vector<Instance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ss(line);
        std::string id, net, prop;
        if (!(ss >> id >> net >> prop))
            throw std::runtime_error(index_path + ":" + std::to_string(line_no) + ": expected `id net prop`");
        auto network = std::make_shared<Network>(load_nnet_file((base / net).string()));
        Query q = parse_property_file((base / prop).string(), *network);
        if (q.label.empty())
            q.label = id;
        out.push_back({id, std::move(network), std::move(q)});
    }
    return out;
}

} // namespace babrl::harness
