#include "babrl/harness/generate.hpp"
#include "babrl/harness/oracle.hpp"
#include "babrl/harness/report.hpp"
#include "babrl/harness/suite.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace babrl;
using namespace babrl::harness;
namespace fs = std::filesystem;

namespace {

Query toy_query(double rhs)
{
    return parse_property_text("out 1 <= " + std::to_string(rhs) + "\n", toy_network());
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("babrl_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunRecord rec(std::string q, std::string s, Outcome v, std::int64_t ms, std::uint64_t iters = 0)
{
    RunRecord r;
    r.query_id = std::move(q);
    r.strategy = std::move(s);
    r.verdict = v;
    r.wall_time_ms = ms;
    r.iterations = iters;
    return r;
}

} // namespace

TEST_CASE("oracle enumerates the four toy patterns")
{
    const Network toy = toy_network();
    const auto patterns = enumerate_patterns(toy, toy_query(-0.5));
    REQUIRE(patterns.size() == 4);
    // binary order: n1 is the high bit, 0 = Inactive
    CHECK(patterns[0].phases == PhaseMap{Phase::Inactive, Phase::Inactive});
    CHECK(patterns[3].phases == PhaseMap{Phase::Active, Phase::Active});
    // both n1-Inactive patterns give y = relu(n2) >= 0, so y <= -0.5 fails
    CHECK_FALSE(patterns[0].property_feasible);
    CHECK_FALSE(patterns[1].property_feasible);
    CHECK(patterns[2].property_feasible);
    CHECK(patterns[3].property_feasible);
    for (const auto& p : patterns) {
        CHECK(p.region_feasible);
        if (p.property_feasible)
            CHECK(check_witness(toy, toy_query(-0.5), p.witness));
    }

    const Verdict v = brute_force_verify(toy, toy_query(-0.5));
    CHECK(v.outcome == Outcome::Sat);
    CHECK(check_witness(toy, toy_query(-0.5), v.witness));
}

TEST_CASE("oracle rejects the toy query below its minimum")
{
    const Network toy = toy_network();
    for (const auto& p : enumerate_patterns(toy, toy_query(-2.5)))
        CHECK_FALSE(p.property_feasible);
    const Verdict v = brute_force_verify(toy, toy_query(-2.5));
    CHECK(v.outcome == Outcome::Unsat);
    CHECK(v.iterations == 4);
    CHECK(brute_force_minimum(toy, toy.input_lower(), toy.input_upper(), Eigen::VectorXd::Ones(1)) ==
          doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("oracle on a network without ReLUs solves one LP")
{
    std::vector<Layer> layers{{Eigen::MatrixXd{{1.0, -1.0}}, Eigen::VectorXd::Zero(1), false}};
    const Network lin(std::move(layers), -Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2));
    const Query q = parse_property_text("out 1 <= -1.5\n", lin);
    const auto patterns = enumerate_patterns(lin, q);
    REQUIRE(patterns.size() == 1);
    CHECK(patterns[0].property_feasible);
    CHECK(brute_force_verify(lin, q).iterations == 1);
    CHECK(brute_force_verify(lin, parse_property_text("out 1 <= -2.5\n", lin)).outcome == Outcome::Unsat);
}

TEST_CASE("oracle guards the ReLU count")
{
    std::mt19937_64 rng(3);
    const Network big = testing::random_network(rng, {2, 11, 10, 1});
    Query q;
    q.input_lower = big.input_lower();
    q.input_upper = big.input_upper();
    q.constraints = {{Eigen::VectorXd::Ones(1), 0.0}};
    CHECK_THROWS_AS(brute_force_verify(big, q), OracleError);
}

TEST_CASE("exact minimum matches a dense grid on one-input networks")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Network net = testing::random_network(rng, {1, 5, 4, 1});
        const double exact =
            brute_force_minimum(net, net.input_lower(), net.input_upper(), Eigen::VectorXd::Ones(1));
        double grid = 1e300;
        const int steps = 200000;
        for (int i = 0; i <= steps; ++i) {
            Eigen::VectorXd x(1);
            x[0] = -1.0 + 2.0 * i / steps;
            grid = std::min(grid, evaluate(net, x)[0]);
        }
        // the grid can only overshoot the true minimum, by at most slope * step
        CHECK(exact <= grid + 1e-9);
        CHECK(grid - exact <= 1e-3);
    }
}

TEST_CASE("verify agrees with the oracle on random instances")
{
    GenSpec spec;
    spec.count = 12;
    const auto suite = gen_random_suite(5, spec);
    for (const auto& inst : suite.instances) {
        const Outcome expected = brute_force_verify(*inst.net, inst.query).outcome;
        for (StrategyKind k : kStaticStrategies) {
            const Verdict v = verify(*inst.net, inst.query, Strategy::of(k), Budget{});
            CHECK_MESSAGE(v.outcome == expected, inst.id << " " << to_string(k));
            if (v.outcome == Outcome::Sat)
                CHECK(check_witness(*inst.net, inst.query, v.witness));
        }
    }
}

TEST_CASE("generated suites are reproducible and calibrated")
{
    GenSpec spec;
    spec.count = 40;
    const auto a = gen_random_suite(17, spec);
    REQUIRE(a.instances.size() == 40);
    for (const auto& inst : a.instances) {
        CHECK(inst.net->input_dim() >= 2);
        CHECK(inst.net->input_dim() <= 5);
        CHECK(inst.net->relu_count() >= 6);
        CHECK(inst.net->relu_count() <= 12);
        CHECK(inst.net->output_dim() == 1);
    }

    // SAT by construction must match the oracle's count
    std::size_t sat = 0;
    for (const auto& inst : a.instances)
        sat += brute_force_verify(*inst.net, inst.query).outcome == Outcome::Sat;
    CHECK(static_cast<double>(sat) / 40.0 == doctest::Approx(a.sat_fraction));
    CHECK(a.sat_fraction >= 0.3);
    CHECK(a.sat_fraction <= 0.7);

    const fs::path d1 = scratch_dir("gen1"), d2 = scratch_dir("gen2");
    write_suite(a, d1.string());
    write_suite(gen_random_suite(17, spec), d2.string());
    for (const auto& entry : fs::directory_iterator(d1))
        CHECK_MESSAGE(slurp(entry.path()) == slurp(d2 / entry.path().filename()), entry.path().string());

    const auto loaded = load_suite_index((d1 / "index.txt").string());
    REQUIRE(loaded.size() == a.instances.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == a.instances[i].id);
        CHECK(loaded[i].net->layers().back().weights == a.instances[i].net->layers().back().weights);
        CHECK(loaded[i].query.constraints[0].rhs == a.instances[i].query.constraints[0].rhs);
    }
    CHECK(gen_random_suite(18, spec).instances[0].query.constraints[0].rhs !=
          a.instances[0].query.constraints[0].rhs);
}

TEST_CASE("suite config parsing")
{
    std::istringstream in("# comment\n"
                          "networks = a.nnet\n"
                          "properties = p1.txt p2.txt\n"
                          "strategies = soi babsr\n"
                          "timeout_s = 2.5\n"
                          "max_iterations = 99\n"
                          "seed = 4\n"
                          "workers = 3\n"
                          "lp_tightening = false\n"
                          "comparator = argmin\n"
                          "output = out\n");
    const SuiteConfig c = parse_suite_config(in, "/base");
    CHECK(c.networks == std::vector<std::string>{"/base/a.nnet"});
    CHECK(c.properties.size() == 2);
    CHECK(c.strategies == std::vector<StrategyKind>{StrategyKind::SoI, StrategyKind::BaBSR});
    CHECK(c.budget.timeout == std::chrono::milliseconds(2500));
    CHECK(c.budget.max_iterations == 99);
    CHECK(c.budget.seed == 4);
    CHECK(c.workers == 3);
    CHECK_FALSE(c.lp_tightening);
    CHECK(c.comparator == Comparator::Argmin);
    CHECK(c.output_dir == "/base/out");

    std::istringstream no_strategy("networks = a.nnet\nproperties = p.txt\n");
    CHECK_THROWS_AS(parse_suite_config(no_strategy), ConfigError);
    std::istringstream bad_key("networks = a.nnet\nproperties = p.txt\nstrategies = soi\ncolour = red\n");
    CHECK_THROWS_AS(parse_suite_config(bad_key), ConfigError);
    std::istringstream agent_no_ckpt("index = i.txt\nstrategies = agent\n");
    CHECK_THROWS_AS(parse_suite_config(agent_no_ckpt), ConfigError);
}

TEST_CASE("suite runs every query and strategy pair")
{
    const fs::path dir = scratch_dir("suite");
    emit_nnet_file(toy_network(), (dir / "toy.nnet").string());
    std::ofstream(dir / "sat.txt") << "out 1 <= -0.5\n";
    std::ofstream(dir / "unsat.txt") << "out 1 <= -2.5\n";
    std::ofstream(dir / "suite.cfg") << "networks = toy.nnet\n"
                                        "properties = sat.txt unsat.txt missing.txt\n"
                                        "strategies = soi polarity babsr\n"
                                        "workers = 2\n"
                                        "output = out\n";
    const SuiteConfig config = load_suite_config((dir / "suite.cfg").string());
    const auto records = run_suite(config);
    REQUIRE(records.size() == 9);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(records[i].query_id == "sat");
        CHECK(records[i].verdict == Outcome::Sat);
        CHECK(records[3 + i].verdict == Outcome::Unsat);
        CHECK(records[6 + i].query_id == "missing");
        CHECK(records[6 + i].verdict == Outcome::Error);
    }
    CHECK(records[1].strategy == "polarity");

    const auto csv = read_csv_file((dir / "out" / "results.csv").string());
    REQUIRE(csv.size() == records.size());
    for (std::size_t i = 0; i < csv.size(); ++i) {
        CHECK(csv[i].query_id == records[i].query_id);
        CHECK(csv[i].strategy == records[i].strategy);
        CHECK(csv[i].verdict == records[i].verdict);
        CHECK(csv[i].iterations == records[i].iterations);
    }

    // a rerun differs at most in wall times
    const auto again = run_suite(config);
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].verdict == records[i].verdict);
        CHECK(again[i].iterations == records[i].iterations);
        CHECK(again[i].splits == records[i].splits);
    }
}

TEST_CASE("suite records a timeout with its budget spent")
{
    std::mt19937_64 rng(2);
    const Instance inst = testing::hard_instance(rng, {4, 10, 10, 1}, "hard");
    Budget budget;
    budget.timeout = std::chrono::milliseconds(1);
    const auto records = run_jobs({{inst.id, inst, ""}}, {StrategyKind::Polarity}, budget, 1, true);
    REQUIRE(records.size() == 1);
    CHECK(records[0].verdict == Outcome::Timeout);
    CHECK(records[0].wall_time_ms >= 1);
}

TEST_CASE("robustness manifests expand to one query per label")
{
    const fs::path dir = scratch_dir("robust");
    std::vector<Layer> layers{{Eigen::MatrixXd{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}, Eigen::VectorXd::Zero(3), false}};
    emit_nnet_file(Network(std::move(layers), -Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2)),
                   (dir / "three.nnet").string());
    std::ofstream(dir / "points.txt") << "0.5 0.1 ; 0.05 0.3\n";
    SuiteConfig c;
    c.networks = {(dir / "three.nnet").string()};
    c.robust_manifest = (dir / "points.txt").string();
    c.strategies = {StrategyKind::Polarity};
    const auto queries = collect_queries(c);
    REQUIRE(queries.size() == 4); // 2 radii x 2 adversarial labels
    for (const auto& q : queries)
        CHECK(q.instance.has_value());
    CHECK(queries[0].id != queries[1].id);
}

TEST_CASE("csv round trip keeps every column")
{
    RunRecord r = rec("q7", "agent", Outcome::Timeout, 1234, 56);
    r.splits = 9;
    r.seed = 3;
    r.checkpoint = "final.json";
    std::stringstream s;
    write_csv({r, rec("q8", "soi", Outcome::Sat, 1)}, s);
    CHECK(s.str().rfind("#version=1\nquery_id,strategy,verdict,wall_time_ms,iterations,splits,seed,checkpoint\n", 0) ==
          0);
    const auto back = read_csv(s);
    REQUIRE(back.size() == 2);
    CHECK(back[0].query_id == "q7");
    CHECK(back[0].strategy == "agent");
    CHECK(back[0].verdict == Outcome::Timeout);
    CHECK(back[0].wall_time_ms == 1234);
    CHECK(back[0].iterations == 56);
    CHECK(back[0].splits == 9);
    CHECK(back[0].seed == 3);
    CHECK(back[0].checkpoint == "final.json");
    CHECK(back[1].checkpoint.empty());

    std::istringstream future("#version=2\n");
    CHECK_THROWS(read_csv(future));
}

TEST_CASE("aggregation counts timeouts at the full budget")
{
    const auto rows = aggregate({rec("a", "soi", Outcome::Sat, 10), rec("b", "soi", Outcome::Unsat, 20),
                                 rec("c", "soi", Outcome::Sat, 30), rec("d", "soi", Outcome::Timeout, 61000)},
                                60000.0);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].sat == 2);
    CHECK(rows[0].unsat == 1);
    CHECK(rows[0].timeout == 1);
    CHECK(rows[0].avg_time_ms == doctest::Approx((10.0 + 20.0 + 30.0 + 60000.0) / 4.0));
    CHECK(aggregate({}, 1000.0).empty());
}

TEST_CASE("aggregation averages over the common attempted set")
{
    const std::vector<RunRecord> records{
        rec("a", "soi", Outcome::Sat, 10, 4),     rec("b", "soi", Outcome::Timeout, 100, 50),
        rec("a", "babsr", Outcome::Timeout, 100, 40), rec("b", "babsr", Outcome::Unsat, 20, 6),
        rec("c", "babsr", Outcome::Sat, 1000, 1000), rec("d", "soi", Outcome::Error, 0, 0)};
    const auto rows = aggregate(records, 100.0);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.common == 2);
        std::size_t n = 0;
        for (const auto& x : records)
            n += x.strategy == r.strategy;
        CHECK(r.total() == n);
    }
    CHECK(rows[0].strategy == "soi");
    CHECK(rows[0].avg_time_ms == doctest::Approx(55.0));
    CHECK(rows[0].avg_iterations == doctest::Approx(27.0));
    CHECK(rows[1].avg_time_ms == doctest::Approx(60.0));
    CHECK(rows[1].error == 0);

    const auto common = common_solved_iterations(records);
    CHECK(common.queries == 0);
    const auto both = common_solved_iterations({rec("a", "soi", Outcome::Sat, 1, 4), rec("a", "babsr", Outcome::Sat, 1, 8),
                                                rec("b", "soi", Outcome::Sat, 1, 10)});
    CHECK(both.queries == 1);
    CHECK(both.avg_iterations.at("soi") == 4.0);
    CHECK(both.avg_iterations.at("babsr") == 8.0);
}

TEST_CASE("cumulative curves")
{
    const std::vector<RunRecord> records{rec("a", "soi", Outcome::Sat, 5), rec("b", "soi", Outcome::Unsat, 1),
                                         rec("c", "soi", Outcome::Sat, 3), rec("d", "soi", Outcome::Timeout, 9),
                                         rec("e", "babsr", Outcome::Timeout, 9)};
    const auto curve = cumulative_curve(records, "soi");
    REQUIRE(curve.size() == 3);
    CHECK(curve[0] == std::pair<double, std::size_t>{1.0, 1});
    CHECK(curve[1] == std::pair<double, std::size_t>{3.0, 2});
    CHECK(curve[2] == std::pair<double, std::size_t>{5.0, 3});
    CHECK(cumulative_curve(records, "babsr").empty());

    const auto tie = cumulative_curve({rec("a", "x", Outcome::Sat, 2), rec("b", "x", Outcome::Sat, 2)}, "x");
    REQUIRE(tie.size() == 2);
    CHECK(tie[0].first == tie[1].first);
    CHECK(tie[1].second == 2);

    std::mt19937_64 rng(1);
    std::vector<RunRecord> many;
    for (int i = 0; i < 50; ++i)
        many.push_back(rec(std::to_string(i), "x", i % 7 == 0 ? Outcome::Timeout : Outcome::Sat,
                           static_cast<std::int64_t>(rng() % 1000)));
    const auto c = cumulative_curve(many, "x");
    for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(c[i].first >= c[i - 1].first);
        CHECK(c[i].second > c[i - 1].second);
    }
}
