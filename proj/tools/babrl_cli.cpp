#include "babrl/agent/checkpoint.hpp"
#include "babrl/agent/trainer.hpp"
#include "babrl/harness/generate.hpp"
#include "babrl/harness/oracle.hpp"
#include "babrl/harness/report.hpp"
#include "babrl/harness/suite.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace babrl;
namespace fs = std::filesystem;

namespace {

std::chrono::milliseconds seconds(double s)
{
    return std::chrono::milliseconds(static_cast<std::int64_t>(s * 1000.0));
}

std::string vec_str(const Eigen::VectorXd& v)
{
    std::ostringstream s;
    s << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        s << (i ? " " : "") << v[i];
    return s.str();
}

void print_verdict(const std::string& id, const Verdict& v)
{
    std::cout << id << ": " << to_string(v.outcome) << " iterations=" << v.iterations << " splits=" << v.splits
              << " wall_time_ms=" << v.wall_time.count() << "\n";
    if (v.outcome == Outcome::Sat)
        std::cout << "  witness " << vec_str(v.witness) << "\n";
    if (!v.message.empty())
        std::cout << "  message " << v.message << "\n";
}

std::vector<Query> load_queries(const Network& net, const std::string& prop, const std::string& manifest,
                                Comparator comparator)
{
    std::vector<Query> out;
    if (!prop.empty())
        out.push_back(parse_property_file(prop, net));
    if (!manifest.empty())
        for (const auto& row : parse_robustness_manifest_file(manifest))
            for (double delta : row.deltas)
                for (auto& q : make_robustness_queries(net, row.x0, delta, comparator))
                    out.push_back(std::move(q));
    if (out.empty())
        throw std::runtime_error("give --prop or --robust-manifest");
    return out;
}

void print_summary(const std::vector<harness::RunRecord>& records, double budget_ms)
{
    std::cout << std::left << std::setw(15) << "strategy" << std::right << std::setw(6) << "SAT" << std::setw(7)
              << "UNSAT" << std::setw(9) << "TIMEOUT" << std::setw(7) << "ERROR" << std::setw(14) << "avg_ms"
              << std::setw(14) << "avg_iters"
              << "\n";
    for (const auto& r : harness::aggregate(records, budget_ms))
        std::cout << std::left << std::setw(15) << r.strategy << std::right << std::setw(6) << r.sat << std::setw(7)
                  << r.unsat << std::setw(9) << r.timeout << std::setw(7) << r.error << std::setw(14) << std::fixed
                  << std::setprecision(2) << r.avg_time_ms << std::setw(14) << r.avg_iterations << "\n";
    const auto common = harness::common_solved_iterations(records);
    std::cout << "solved by all: " << common.queries << "\n";
    for (const auto& [s, it] : common.avg_iterations)
        std::cout << "  " << s << " avg iterations " << it << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Branch-and-bound verifier for ReLU networks with learned split selection"};
    app.require_subcommand(1);

    std::string net_path, prop_path, manifest, comparator = "argmax", strategy = "polarity", checkpoint, out;
    double timeout_s = 60.0;
    std::uint64_t seed = 0, max_iterations = 10'000'000;
    std::size_t workers = 1;
    bool no_tightening = false;

    auto budget = [&] {
        Budget b;
        b.timeout = seconds(timeout_s);
        b.max_iterations = max_iterations;
        b.seed = seed;
        return b;
    };

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Verify a single query");
    verify_cmd->add_option("--net", net_path, "NNet file")->required()->check(CLI::ExistingFile);
    verify_cmd->add_option("--prop", prop_path, "property file")->check(CLI::ExistingFile);
    verify_cmd->add_option("--robust-manifest", manifest, "robustness manifest")->check(CLI::ExistingFile);
    verify_cmd->add_option("--comparator", comparator, "argmax or argmin")->capture_default_str();
    verify_cmd->add_option("--strategy", strategy, "soi|polarity|pseudo-impact|babsr|agent")->capture_default_str();
    verify_cmd->add_option("--checkpoint", checkpoint, "agent checkpoint");
    verify_cmd->add_option("--timeout-s", timeout_s)->capture_default_str();
    verify_cmd->add_option("--max-iterations", max_iterations)->capture_default_str();
    verify_cmd->add_option("--seed", seed)->capture_default_str();
    verify_cmd->add_flag("--no-lp-tightening", no_tightening, "interval bounds only");
    verify_cmd->add_option("--out", out, "write the search event log here");

    // bench
    std::string config_path, index_path;
    std::vector<std::string> nets, props, strategies;
    auto* bench_cmd = app.add_subcommand("bench", "Run a suite of queries under several strategies");
    bench_cmd->add_option("--config", config_path, "suite config file")->check(CLI::ExistingFile);
    bench_cmd->add_option("--net", nets, "NNet files");
    bench_cmd->add_option("--prop", props, "property files");
    bench_cmd->add_option("--index", index_path, "generated suite index");
    bench_cmd->add_option("--robust-manifest", manifest, "robustness manifest");
    bench_cmd->add_option("--comparator", comparator)->capture_default_str();
    bench_cmd->add_option("--strategy", strategies, "strategies to run");
    bench_cmd->add_option("--checkpoint", checkpoint, "agent checkpoint");
    bench_cmd->add_option("--timeout-s", timeout_s)->capture_default_str();
    bench_cmd->add_option("--max-iterations", max_iterations)->capture_default_str();
    bench_cmd->add_option("--seed", seed)->capture_default_str();
    bench_cmd->add_option("--workers", workers)->capture_default_str();
    bench_cmd->add_flag("--no-lp-tightening", no_tightening);
    bench_cmd->add_option("--out", out, "output directory for results.csv");

    // train
    std::size_t train_count = 0, demo_epochs = 5, finetune_epochs = 40, steps_per_epoch = 1000;
    double episode_timeout_s = 10.0;
    std::uint64_t episode_iterations = 5000;
    auto* train_cmd = app.add_subcommand("train", "Train the split agent");
    train_cmd->add_option("--index", index_path, "suite index")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--count", train_count,
                          "queries from the head of the index used for demonstrations and self-play (default 5%)");
    train_cmd->add_option("--demo-epochs", demo_epochs)->capture_default_str();
    train_cmd->add_option("--finetune-epochs", finetune_epochs)->capture_default_str();
    train_cmd->add_option("--steps-per-epoch", steps_per_epoch)->capture_default_str();
    train_cmd->add_option("--timeout-s", episode_timeout_s, "per-episode timeout")->capture_default_str();
    train_cmd->add_option("--max-iterations", episode_iterations, "per-episode iteration cap")->capture_default_str();
    train_cmd->add_option("--seed", seed)->capture_default_str();
    train_cmd->add_option("--out", out, "checkpoint directory")->required();

    // oracle
    auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force verification by activation-pattern enumeration");
    oracle_cmd->add_option("--net", net_path)->required()->check(CLI::ExistingFile);
    oracle_cmd->add_option("--prop", prop_path)->check(CLI::ExistingFile);
    oracle_cmd->add_option("--robust-manifest", manifest)->check(CLI::ExistingFile);
    oracle_cmd->add_option("--comparator", comparator)->capture_default_str();

    // report
    std::string csv_path;
    double budget_s = 60.0;
    auto* report_cmd = app.add_subcommand("report", "Aggregate a results CSV and emit cumulative curves");
    report_cmd->add_option("--csv", csv_path, "results.csv from bench")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--timeout-s", budget_s, "budget charged to timeouts")->capture_default_str();
    report_cmd->add_option("--out", out, "directory for summary.csv and curve_<strategy>.csv");

    // gen
    harness::GenSpec spec;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a random network and property suite");
    gen_cmd->add_option("--seed", seed)->capture_default_str();
    gen_cmd->add_option("--count", spec.count)->capture_default_str();
    gen_cmd->add_option("--min-inputs", spec.min_inputs)->capture_default_str();
    gen_cmd->add_option("--max-inputs", spec.max_inputs)->capture_default_str();
    gen_cmd->add_option("--min-relus", spec.min_relus)->capture_default_str();
    gen_cmd->add_option("--max-relus", spec.max_relus)->capture_default_str();
    gen_cmd->add_option("--max-layers", spec.max_hidden_layers)->capture_default_str();
    gen_cmd->add_option("--spread", spec.spread)->capture_default_str();
    gen_cmd->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify_cmd->parsed()) {
            const Network net = load_nnet_file(net_path);
            const auto queries = load_queries(net, prop_path, manifest, comparator_from_string(comparator));
            const StrategyKind kind = strategy_from_string(strategy);
            std::shared_ptr<const agent::QNet> qnet;
            if (kind == StrategyKind::Agent) {
                if (checkpoint.empty())
                    throw std::runtime_error("--strategy agent needs --checkpoint");
                qnet = std::make_shared<agent::QNet>(agent::load_checkpoint(checkpoint).net);
            }
            SearchOptions options;
            options.lp_tightening = !no_tightening;
            std::ofstream events;
            if (!out.empty())
                events.open(out);
            bool any_sat = false;
            for (const auto& q : queries) {
                const Strategy s = qnet ? agent::make_agent_strategy(qnet) : Strategy::of(kind);
                const SearchRun run = run_search(net, q, s, budget(), options);
                print_verdict(q.label, run.verdict);
                if (events.is_open())
                    write_event_log(run.events, events);
                any_sat = any_sat || run.verdict.outcome == Outcome::Sat;
            }
            if (queries.size() > 1)
                std::cout << "group: " << (any_sat ? "SAT (not robust)" : "no member SAT") << "\n";
        } else if (bench_cmd->parsed()) {
            harness::SuiteConfig c;
            if (!config_path.empty())
                c = harness::load_suite_config(config_path);
            for (const auto& n : nets)
                c.networks.push_back(n);
            for (const auto& p : props)
                c.properties.push_back(p);
            for (const auto& s : strategies)
                c.strategies.push_back(strategy_from_string(s));
            if (!index_path.empty())
                c.index = index_path;
            if (!manifest.empty())
                c.robust_manifest = manifest;
            if (!bench_cmd->get_option("--comparator")->empty())
                c.comparator = comparator_from_string(comparator);
            if (!checkpoint.empty())
                c.checkpoint = checkpoint;
            if (!bench_cmd->get_option("--timeout-s")->empty() || config_path.empty())
                c.budget.timeout = seconds(timeout_s);
            if (!bench_cmd->get_option("--max-iterations")->empty())
                c.budget.max_iterations = max_iterations;
            if (!bench_cmd->get_option("--seed")->empty())
                c.budget.seed = seed;
            if (!bench_cmd->get_option("--workers")->empty())
                c.workers = workers;
            if (no_tightening)
                c.lp_tightening = false;
            if (!out.empty())
                c.output_dir = out;
            const auto records = harness::run_suite(c);
            print_summary(records, static_cast<double>(c.budget.timeout.count()));
            if (!c.output_dir.empty())
                std::cout << "results: " << (fs::path(c.output_dir) / "results.csv").string() << "\n";
        } else if (train_cmd->parsed()) {
            agent::TrainerConfig tc;
            tc.demo_epochs = demo_epochs;
            tc.finetune_epochs = finetune_epochs;
            tc.demo_steps = steps_per_epoch;
            tc.finetune_steps = steps_per_epoch;
            tc.seed = seed;
            tc.episode_timeout = seconds(episode_timeout_s);
            tc.episode_max_iterations = episode_iterations;
            tc.checkpoint_dir = out;
            auto queries = harness::load_suite_index(index_path);
            const std::size_t n = train_count > 0 ? train_count : std::max<std::size_t>(1, (queries.size() + 19) / 20);
            if (n < queries.size())
                queries.resize(n);
            const std::vector<Instance>& demo_queries = queries;
            std::cout << "collecting demonstrations on " << demo_queries.size() << " queries\n";
            const auto demos = agent::collect_demonstrations(demo_queries, tc);
            std::cout << demos.transitions.size() << " demonstration transitions\n";
            const auto result = agent::train(tc, demos, queries, [](const std::string& m) { std::cout << m << "\n"; });
            std::cout << "episodes " << result.episodes << ", self-play transitions " << result.self_transitions
                      << "\n";
            for (const auto& p : result.checkpoints)
                std::cout << "checkpoint " << p << "\n";
        } else if (oracle_cmd->parsed()) {
            const Network net = load_nnet_file(net_path);
            for (const auto& q : load_queries(net, prop_path, manifest, comparator_from_string(comparator)))
                print_verdict(q.label, harness::brute_force_verify(net, q));
        } else if (report_cmd->parsed()) {
            const auto records = harness::read_csv_file(csv_path);
            print_summary(records, budget_s * 1000.0);
            if (!out.empty()) {
                fs::create_directories(out);
                std::ofstream summary(fs::path(out) / "summary.csv");
                harness::write_summary_csv(harness::aggregate(records, budget_s * 1000.0), summary);
                for (const auto& row : harness::aggregate(records, budget_s * 1000.0)) {
                    std::ofstream curve(fs::path(out) / ("curve_" + row.strategy + ".csv"));
                    harness::write_curve_csv(harness::cumulative_curve(records, row.strategy), curve);
                }
                std::cout << "wrote " << out << "\n";
            }
        } else if (gen_cmd->parsed()) {
            const auto suite = harness::gen_random_suite(seed, spec);
            harness::write_suite(suite, out);
            std::cout << "wrote " << suite.instances.size() << " instances to " << out;
            if (suite.sat_fraction == suite.sat_fraction)
                std::cout << " (SAT fraction " << suite.sat_fraction << ")";
            std::cout << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
