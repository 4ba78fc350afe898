#include "babrl/harness/suite.hpp"

#include "babrl/agent/checkpoint.hpp"
#include "babrl/agent/trainer.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace babrl::harness {

namespace fs = std::filesystem;

void SuiteConfig::validate() const
{
    if (strategies.empty())
        throw ConfigError("suite config: no strategies");
    if (networks.empty() && index.empty())
        throw ConfigError("suite config: no networks or index");
    if (!networks.empty() && properties.empty() && robust_manifest.empty())
        throw ConfigError("suite config: networks need properties or a robust_manifest");
    if (workers == 0)
        throw ConfigError("suite config: workers must be positive");
    for (StrategyKind k : strategies)
        if (k == StrategyKind::Agent && checkpoint.empty())
            throw ConfigError("suite config: agent strategy needs a checkpoint");
}

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

std::string resolve(const std::string& base, const std::string& p)
{
    if (base.empty() || p.empty() || fs::path(p).is_absolute())
        return p;
    return (fs::path(base) / p).string();
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw ConfigError("suite config: " + key + " expects true or false, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v)
{
    std::istringstream in(v);
    T x{};
    if (!(in >> x) || !(in >> std::ws).eof())
        throw ConfigError("suite config: " + key + " expects a number, got '" + v + "'");
    return x;
}

std::string stem(const std::string& p)
{
    return fs::path(p).stem().string();
}

} // namespace

SuiteConfig parse_suite_config(std::istream& in, const std::string& base_dir)
{
    SuiteConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("suite config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "networks") {
                for (const auto& w : words(value))
                    c.networks.push_back(resolve(base_dir, w));
            } else if (key == "properties") {
                for (const auto& w : words(value))
                    c.properties.push_back(resolve(base_dir, w));
            } else if (key == "robust_manifest") {
                c.robust_manifest = resolve(base_dir, value);
            } else if (key == "comparator") {
                c.comparator = comparator_from_string(value);
            } else if (key == "index") {
                c.index = resolve(base_dir, value);
            } else if (key == "strategies") {
                for (const auto& w : words(value))
                    c.strategies.push_back(strategy_from_string(w));
            } else if (key == "checkpoint") {
                c.checkpoint = resolve(base_dir, value);
            } else if (key == "timeout_s") {
                c.budget.timeout = std::chrono::milliseconds(
                    static_cast<std::int64_t>(parse_number<double>(key, value) * 1000.0));
            } else if (key == "max_iterations") {
                c.budget.max_iterations = parse_number<std::uint64_t>(key, value);
            } else if (key == "seed") {
                c.budget.seed = parse_number<std::uint64_t>(key, value);
            } else if (key == "workers") {
                c.workers = parse_number<std::size_t>(key, value);
            } else if (key == "output") {
                c.output_dir = resolve(base_dir, value);
            } else if (key == "lp_tightening") {
                c.lp_tightening = parse_bool(key, value);
            } else {
                throw ConfigError("unknown key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("suite config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

SuiteConfig load_suite_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read suite config " + path);
    return parse_suite_config(in, fs::path(path).parent_path().string());
}

std::vector<SuiteQuery> collect_queries(const SuiteConfig& config)
{
    std::vector<SuiteQuery> out;
    std::vector<std::shared_ptr<const Network>> nets(config.networks.size());
    std::vector<std::string> net_errors(config.networks.size());
    for (std::size_t i = 0; i < config.networks.size(); ++i) {
        try {
            nets[i] = std::make_shared<Network>(load_nnet_file(config.networks[i]));
        } catch (const std::exception& e) {
            net_errors[i] = e.what();
        }
    }

    const auto& props = config.properties;
    const std::size_t n_nets = config.networks.size();
    if (!props.empty() && n_nets > 0) {
        if (n_nets != props.size() && n_nets != 1 && props.size() != 1)
            throw ConfigError("suite config: " + std::to_string(n_nets) + " networks cannot be paired with " +
                              std::to_string(props.size()) + " properties");
        const std::size_t pairs = std::max(n_nets, props.size());
        for (std::size_t k = 0; k < pairs; ++k) {
            const std::size_t ni = n_nets == 1 ? 0 : k;
            const std::string& prop = props[props.size() == 1 ? 0 : k];
            SuiteQuery sq;
            sq.id = n_nets == 1 ? stem(prop) : stem(config.networks[ni]) + ":" + stem(prop);
            if (!nets[ni]) {
                sq.error = net_errors[ni];
            } else {
                try {
                    sq.instance = Instance{sq.id, nets[ni], parse_property_file(prop, *nets[ni])};
                } catch (const std::exception& e) {
                    sq.error = e.what();
                }
            }
            out.push_back(std::move(sq));
        }
    }

    if (!config.robust_manifest.empty() && n_nets > 0) {
        std::vector<ManifestRow> rows;
        std::string manifest_error;
        try {
            rows = parse_robustness_manifest_file(config.robust_manifest);
        } catch (const std::exception& e) {
            manifest_error = e.what();
        }
        for (std::size_t ni = 0; ni < n_nets; ++ni) {
            const std::string net_id = stem(config.networks[ni]);
            if (!manifest_error.empty() || !nets[ni]) {
                out.push_back({net_id + ":robust", std::nullopt, nets[ni] ? manifest_error : net_errors[ni]});
                continue;
            }
            for (const auto& row : rows) {
                for (std::size_t d = 0; d < row.deltas.size(); ++d) {
                    const std::string group = net_id + ":r" + std::to_string(row.line) + ":d" + std::to_string(d);
                    try {
                        const auto qs = make_robustness_queries(*nets[ni], row.x0, row.deltas[d], config.comparator);
                        for (std::size_t j = 0; j < qs.size(); ++j) {
                            const std::string id = group + ":q" + std::to_string(j);
                            out.push_back({id, Instance{id, nets[ni], qs[j]}, ""});
                        }
                    } catch (const std::exception& e) {
                        out.push_back({group, std::nullopt, e.what()});
                    }
                }
            }
        }
    }

    if (!config.index.empty()) {
        std::ifstream in(config.index);
        if (!in)
            out.push_back({stem(config.index), std::nullopt, "cannot read suite index " + config.index});
        const auto base = fs::path(config.index).parent_path();
        std::string line;
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            std::string id, net, prop;
            if (line.empty() || line[0] == '#' || !(ss >> id >> net >> prop))
                continue;
            SuiteQuery sq;
            sq.id = id;
            try {
                auto network = std::make_shared<Network>(load_nnet_file((base / net).string()));
                Query q = parse_property_file((base / prop).string(), *network);
                sq.instance = Instance{id, std::move(network), std::move(q)};
            } catch (const std::exception& e) {
                sq.error = e.what();
            }
            out.push_back(std::move(sq));
        }
    }
    return out;
}

void write_csv_header(std::ostream& out)
{
    out << "#version=" << kCsvVersion << "\n";
    out << "query_id,strategy,verdict,wall_time_ms,iterations,splits,seed,checkpoint\n";
}

void write_csv_row(const RunRecord& r, std::ostream& out)
{
    out << r.query_id << "," << r.strategy << "," << to_string(r.verdict) << "," << r.wall_time_ms << ","
        << r.iterations << "," << r.splits << "," << r.seed << "," << r.checkpoint << "\n";
}

void write_csv(const std::vector<RunRecord>& records, std::ostream& out)
{
    write_csv_header(out);
    for (const auto& r : records)
        write_csv_row(r, out);
}

std::vector<RunRecord> read_csv(std::istream& in)
{
    std::vector<RunRecord> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            if (line.rfind("#version=", 0) == 0 && line.substr(9) != std::to_string(kCsvVersion))
                throw std::runtime_error("results csv: unsupported " + line.substr(1));
            continue;
        }
        if (!header) {
            header = true;
            if (line.rfind("query_id,", 0) == 0)
                continue;
        }
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
            f.push_back(cell);
        if (line.back() == ',')
            f.emplace_back();
        if (f.size() != 8)
            throw std::runtime_error("results csv line " + std::to_string(line_no) + ": expected 8 fields");
        try {
            RunRecord r;
            r.query_id = f[0];
            r.strategy = f[1];
            r.verdict = outcome_from_string(f[2]);
            r.wall_time_ms = std::stoll(f[3]);
            r.iterations = std::stoull(f[4]);
            r.splits = std::stoull(f[5]);
            r.seed = std::stoull(f[6]);
            r.checkpoint = f[7];
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error("results csv line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RunRecord> read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read results csv " + path);
    return read_csv(in);
}

std::vector<RunRecord> run_jobs(const std::vector<SuiteQuery>& queries, const std::vector<StrategyKind>& strategies,
                                const Budget& budget, std::size_t workers, bool lp_tightening,
                                const std::string& checkpoint, const std::string& csv_path)
{
    std::shared_ptr<const agent::QNet> qnet;
    std::string checkpoint_id;
    std::string checkpoint_error;
    for (StrategyKind k : strategies) {
        if (k != StrategyKind::Agent || qnet)
            continue;
        checkpoint_id = checkpoint.empty() ? "" : fs::path(checkpoint).filename().string();
        try {
            if (checkpoint.empty())
                throw std::runtime_error("agent strategy needs a checkpoint");
            qnet = std::make_shared<agent::QNet>(agent::load_checkpoint(checkpoint).net);
        } catch (const std::exception& e) {
            checkpoint_error = e.what();
        }
        break;
    }

    const std::size_t total = queries.size() * strategies.size();
    std::vector<RunRecord> records(total);
    std::mutex sink;
    std::ofstream csv;
    if (!csv_path.empty()) {
        if (const auto dir = fs::path(csv_path).parent_path(); !dir.empty())
            fs::create_directories(dir);
        csv.open(csv_path);
        if (!csv)
            throw std::runtime_error("cannot write " + csv_path);
        write_csv_header(csv);
        csv.flush();
    }

    auto run_one = [&](std::size_t job) {
        const SuiteQuery& sq = queries[job / strategies.size()];
        const StrategyKind kind = strategies[job % strategies.size()];
        RunRecord r;
        r.query_id = sq.id;
        r.strategy = to_string(kind);
        r.seed = budget.seed;
        if (kind == StrategyKind::Agent)
            r.checkpoint = checkpoint_id;
        try {
            if (!sq.instance)
                throw std::runtime_error(sq.error);
            Strategy strategy = Strategy::of(kind);
            if (kind == StrategyKind::Agent) {
                if (!qnet)
                    throw std::runtime_error(checkpoint_error);
                strategy = agent::make_agent_strategy(qnet);
            }
            SearchOptions options;
            options.lp_tightening = lp_tightening;
            const Verdict v = verify(*sq.instance->net, sq.instance->query, strategy, budget, options);
            r.verdict = v.outcome;
            r.wall_time_ms = v.wall_time.count();
            r.iterations = v.iterations;
            r.splits = v.splits;
            r.witness = v.witness;
            r.message = v.message;
        } catch (const std::exception& e) {
            r.verdict = Outcome::Error;
            r.message = e.what();
        }
        std::lock_guard lock(sink);
        if (csv.is_open()) {
            write_csv_row(r, csv);
            csv.flush();
        }
        records[job] = std::move(r);
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job; (job = next.fetch_add(1)) < total;)
            run_one(job);
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, total));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n; ++i)
            pool.emplace_back(worker);
    }

    if (csv.is_open()) {
        csv.close();
        std::ofstream final_csv(csv_path, std::ios::trunc);
        write_csv(records, final_csv);
    }
    return records;
}

std::vector<RunRecord> run_suite(const SuiteConfig& config)
{
    config.validate();
    const std::string csv = config.output_dir.empty() ? "" : (fs::path(config.output_dir) / "results.csv").string();
    return run_jobs(collect_queries(config), config.strategies, config.budget, config.workers, config.lp_tightening,
                    config.checkpoint, csv);
}

} // namespace babrl::harness
