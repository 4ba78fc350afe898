#include "babrl/agent/checkpoint.hpp"
#include "babrl/agent/trainer.hpp"
#include "babrl/harness/generate.hpp"
#include "babrl/harness/oracle.hpp"
#include "babrl/harness/report.hpp"
#include "babrl/harness/suite.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using namespace babrl;
using namespace babrl::agent;
namespace fs = std::filesystem;

namespace {

constexpr double kWitnessTol = 1e-6;
constexpr double kExact = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kImitationMin = 0.70;
constexpr double kTrendRatio = 1.15;
constexpr std::size_t kTrendSolvedSlack = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t)
{
    return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Result {
    bool pass = false;
    std::string detail;
};

// SAT verdicts collected by every criterion for the witness audit
struct WitnessLog {
    struct Entry {
        std::shared_ptr<const Network> net;
        Query query;
        Eigen::VectorXd witness;
        std::string origin;
    };
    std::vector<Entry> entries;

    void add(std::shared_ptr<const Network> net, const Query& q, const Eigen::VectorXd& w, std::string origin)
    {
        entries.push_back({std::move(net), q, w, std::move(origin)});
    }
};

// box and output constraints re-evaluated without the library's checker
bool independent_witness_check(const Network& net, const Query& q, const Eigen::VectorXd& x)
{
    if (x.size() != q.input_lower.size())
        return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || x[i] < q.input_lower[i] - kWitnessTol || x[i] > q.input_upper[i] + kWitnessTol)
            return false;
    Eigen::VectorXd a = x;
    for (const auto& l : net.layers()) {
        Eigen::VectorXd z = l.weights * a + l.bias;
        if (l.relu)
            for (Eigen::Index i = 0; i < z.size(); ++i)
                z[i] = z[i] > 0.0 ? z[i] : 0.0;
        a = z;
    }
    for (const auto& c : q.constraints) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < a.size(); ++j)
            s += c.coeffs[j] * a[j];
        if (s > c.rhs + kWitnessTol)
            return false;
    }
    return true;
}

Query toy_query(double rhs)
{
    return parse_property_text("out 1 <= " + std::to_string(rhs) + "\n", toy_network());
}

std::size_t count_nodes(const EventLog& log, bool leaves_only)
{
    std::size_t n = 0;
    for (const auto& e : log)
        if (e.kind == SearchEvent::Kind::Node && (!leaves_only || e.outcome != NodeOutcome::Split))
            ++n;
    return n;
}

std::shared_ptr<const QNet> fresh_qnet(std::uint64_t seed)
{
    Rng rng(seed);
    return std::make_shared<const QNet>(QNet::make(TrainerConfig{}.dims(), rng));
}

// ---------------------------------------------------------------------------

Result running_example(WitnessLog& wl)
{
    const auto start = Clock::now();
    const auto toy = std::make_shared<const Network>(toy_network());
    const Query q = toy_query(-0.5);
    const NeuronId n1{0, 0}, n2{0, 1};
    std::ostringstream d;
    bool ok = true;

    std::vector<std::pair<std::string, Strategy>> strategies;
    for (StrategyKind k : kStaticStrategies)
        strategies.emplace_back(to_string(k), Strategy::of(k));
    strategies.emplace_back("agent", make_agent_strategy(fresh_qnet(1)));
    for (const auto& [name, s] : strategies) {
        const Verdict v = verify(*toy, q, s, Budget{});
        const bool good = v.outcome == Outcome::Sat && independent_witness_check(*toy, q, v.witness);
        if (v.outcome == Outcome::Sat)
            wl.add(toy, q, v.witness, "toy/" + name);
        ok = ok && good;
        if (!good)
            d << name << " gave " << to_string(v.outcome) << "; ";
    }

    SearchOptions forced;
    forced.forced_prefix = {{n1, Phase::Inactive}};
    const SearchRun fr = run_search(*toy, q, Strategy::of(StrategyKind::Polarity), Budget{}, forced);
    // the Inactive child of the root must be a leaf: no node has it as parent
    std::optional<std::uint64_t> inactive_child;
    for (const auto& e : fr.events)
        if (e.kind == SearchEvent::Kind::Node && e.parent == 0 && e.edge == SplitAction{n1, Phase::Inactive})
            inactive_child = e.id;
    bool closed_at_once = inactive_child.has_value();
    for (const auto& e : fr.events)
        if (inactive_child && e.kind == SearchEvent::Kind::Node &&
            e.parent == static_cast<std::int64_t>(*inactive_child))
            closed_at_once = false;
    if (fr.verdict.outcome == Outcome::Sat)
        wl.add(toy, q, fr.verdict.witness, "toy/forced");
    ok = ok && closed_at_once;
    d << "forced n1:I branch closed with no further split: " << (closed_at_once ? "yes" : "no") << "; ";

    SearchOptions exhaustive;
    exhaustive.lp_tightening = false;
    exhaustive.stop_at_sat = false;
    exhaustive.forced_prefix = {{n2, Phase::Inactive}, {n1, Phase::Inactive}};
    const SearchRun ex = run_search(*toy, q, Strategy::of(StrategyKind::Polarity), Budget{}, exhaustive);
    const std::size_t leaves = count_nodes(ex.events, true);
    ok = ok && leaves == 4;
    d << "n2-first leaves visited: " << leaves << "; ";

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 1.0;
    d << "runtime " << std::fixed << std::setprecision(3) << elapsed << " s";
    return {ok, d.str()};
}

Result oracle_equivalence(WitnessLog& wl)
{
    const auto start = Clock::now();
    const harness::GeneratedSuite suite = harness::gen_random_suite(20260, harness::GenSpec{});
    std::size_t agree = 0, total = 0, sat = 0;
    std::ostringstream mismatches;
    for (const auto& inst : suite.instances) {
        const Outcome expected = harness::brute_force_verify(*inst.net, inst.query).outcome;
        sat += expected == Outcome::Sat;
        for (StrategyKind k : kStaticStrategies) {
            const Verdict v = verify(*inst.net, inst.query, Strategy::of(k), Budget{});
            ++total;
            if (v.outcome == expected)
                ++agree;
            else
                mismatches << " " << inst.id << "/" << to_string(k);
            if (v.outcome == Outcome::Sat)
                wl.add(inst.net, inst.query, v.witness, inst.id + "/" + to_string(k));
        }
    }
    const double elapsed = seconds_since(start);
    const bool ok = suite.instances.size() == 200 && agree == total && elapsed < 600.0;
    std::ostringstream d;
    d << agree << "/" << total << " outcomes agree over " << suite.instances.size() << " instances (oracle SAT "
      << sat << ", SAT fraction " << suite.sat_fraction << "); runtime " << std::fixed << std::setprecision(1)
      << elapsed << " s";
    if (!mismatches.str().empty())
        d << "; mismatches:" << mismatches.str().substr(0, 400);
    return {ok, d.str()};
}

Result witness_soundness(const WitnessLog& wl)
{
    std::size_t good = 0;
    std::string first_bad;
    for (const auto& e : wl.entries) {
        if (check_witness(*e.net, e.query, e.witness) && independent_witness_check(*e.net, e.query, e.witness))
            ++good;
        else if (first_bad.empty())
            first_bad = e.origin;
    }
    std::ostringstream d;
    d << good << "/" << wl.entries.size() << " SAT witnesses pass at tolerance " << kWitnessTol;
    if (!first_bad.empty())
        d << "; first failure " << first_bad;
    return {!wl.entries.empty() && good == wl.entries.size(), d.str()};
}

Result formula_suite()
{
    std::vector<std::pair<std::string, bool>> checks;
    auto near = [](double a, double b) { return std::abs(a - b) <= kExact; };

    checks.emplace_back("soi_error(0.6,0.6)=0", near(soi_error(0.6, 0.6), 0.0));
    checks.emplace_back("soi_error(-0.4,0)=0", near(soi_error(-0.4, 0.0), 0.0));
    checks.emplace_back("soi_error(2,3)=1", near(soi_error(2.0, 3.0), 1.0));

    const Network toy = toy_network();
    NodeState node = make_root(toy);
    node.relaxation = RelaxationPoint{Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0.5),
                                      Eigen::VectorXd::Zero(1)};
    checks.emplace_back("soi_total toy (0,0.5)x2 = 1", near(soi_total(node), 1.0));

    checks.emplace_back("polarity(-1,1)=0", near(polarity(-1, 1), 0.0));
    checks.emplace_back("polarity(-1,3)=0.5", near(polarity(-1, 3), 0.5));
    checks.emplace_back("polarity(-2,0.5)=-0.6", near(polarity(-2, 0.5), -0.6));

    // BaBSR: toy root has zero biases, so only the intercept term ranks
    NodeState root = make_root(toy);
    root.bounds = *propagate_intervals(toy, toy.input_lower(), toy.input_upper(), root.phases);
    const OutputConstraint c{Eigen::VectorXd::Ones(1), -0.5};
    const auto toy_scores = babsr_scores(toy, root, std::span(&c, 1));
    // n1 in [-2,2]: nu_hat = -1 <= 0 -> score = max(v*0, (v-1)*0) = 0
    checks.emplace_back("babsr toy n1 = 0 (nu_hat <= 0)", near(toy_scores.at({0, 0}), 0.0));
    // n2 in [-2,1]: nu_hat = 1 -> 0 - (1/3) * 1
    checks.emplace_back("babsr toy n2 = -1/3", near(toy_scores.at({0, 1}), -1.0 / 3.0));
    NodeState all_fixed = root;
    all_fixed.phases = {Phase::Active, Phase::Inactive};
    checks.emplace_back("babsr all-fixed node is empty", babsr_scores(toy, all_fixed, std::span(&c, 1)).empty());
    bool degenerate_throws = false;
    NodeState flat = root;
    flat.bounds.layers[0].pre_lower[0] = flat.bounds.layers[0].pre_upper[0] = 1.0;
    try {
        babsr_scores(toy, flat, std::span(&c, 1));
    } catch (const std::invalid_argument&) {
        degenerate_throws = true;
    }
    checks.emplace_back("babsr u == l rejected", degenerate_throws);

    checks.emplace_back("pi_update(0,1,0.5)=0.5", near(pseudo_impact_update(0.0, 1.0, 0.5), 0.5));
    checks.emplace_back("pi_update fixpoint", near(pseudo_impact_update(0.3, 0.3, 0.5), 0.3));
    checks.emplace_back("pi_update(0.5,0,0.5)=0.25", near(pseudo_impact_update(0.5, 0.0, 0.5), 0.25));

    // delayed rewards on hand-built logs
    auto node_ev = [](std::uint64_t id, std::int64_t parent, std::size_t unfixed, bool split) {
        SearchEvent e;
        e.id = id;
        e.parent = parent;
        e.unfixed = unfixed;
        e.outcome = split ? NodeOutcome::Split : NodeOutcome::Unsat;
        if (split)
            e.split = SplitAction{{0, 0}, Phase::Inactive};
        return e;
    };
    auto close_ev = [](std::uint64_t id) {
        SearchEvent e;
        e.kind = SearchEvent::Kind::Close;
        e.id = id;
        return e;
    };
    const EventLog one_split{node_ev(0, -1, 2, true), node_ev(1, 0, 1, false), close_ev(1),
                             node_ev(2, 0, 1, false), close_ev(2), close_ev(0)};
    checks.emplace_back("reward k=2 single split = -1/3", near(record_delayed_rewards(one_split)[0].reward, -1.0 / 3));
    EventLog full;
    std::uint64_t next = 0;
    std::function<void(std::int64_t, std::size_t)> grow = [&](std::int64_t parent, std::size_t k) {
        const std::uint64_t id = next++;
        full.push_back(node_ev(id, parent, k, k > 0));
        if (k > 0) {
            grow(static_cast<std::int64_t>(id), k - 1);
            grow(static_cast<std::int64_t>(id), k - 1);
        }
        full.push_back(close_ev(id));
    };
    grow(-1, 3);
    checks.emplace_back("reward k=3 exhaustive = -1", near(record_delayed_rewards(full)[0].reward, -1.0));
    const EventLog single{node_ev(0, -1, 1, true), node_ev(1, 0, 0, false), close_ev(1), close_ev(0)};
    checks.emplace_back("reward k=1 = -1", near(record_delayed_rewards(single)[0].reward, -1.0));

    std::size_t passed = 0;
    std::string failed;
    for (const auto& [name, ok] : checks) {
        passed += ok;
        if (!ok)
            failed += " [" + name + "]";
    }
    std::ostringstream d;
    d << passed << "/" << checks.size() << " formula examples within " << kExact;
    if (!failed.empty())
        d << "; failed:" << failed;
    return {passed == checks.size(), d.str()};
}

Result gradient_check_suite()
{
    const auto start = Clock::now();
    std::mt19937_64 g(505);
    double worst = 0.0;
    std::size_t params = 0, kinks = 0;
    const int configs = 100;
    for (int trial = 0; trial < configs; ++trial) {
        Rng rng(7000 + static_cast<std::uint64_t>(trial));
        TrainerConfig cfg;
        cfg.gamma = std::uniform_real_distribution<double>(0.5, 0.99)(g);
        cfg.margin = std::uniform_real_distribution<double>(0.1, 1.0)(g);
        const QNet online = QNet::make(cfg.dims(), rng);
        const QNet target = QNet::make(cfg.dims(), rng);
        const auto ts = testing::random_transitions(g, 1 + static_cast<std::size_t>(trial % 3));
        std::vector<const Transition*> batch;
        std::vector<double> w;
        for (const auto& t : ts) {
            batch.push_back(&t);
            w.push_back(std::uniform_real_distribution<double>(0.05, 1.0)(g));
        }
        const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(g);
        const testing::GradCheck r = testing::gradient_check(online, target, batch, w, lambda, cfg, 1e-5);
        worst = std::max(worst, r.rel_error);
        params += r.params;
        kinks += r.kinks;
    }
    std::ostringstream d;
    d << "max relative error " << std::scientific << std::setprecision(2) << worst << " over " << configs
      << " configurations (" << params << " parameter probes, " << kinks << " excluded at kinks); runtime "
      << std::fixed << std::setprecision(1) << seconds_since(start) << " s";
    return {worst <= kGradTol && kinks * 10 < params, d.str()};
}

Result target_and_margin()
{
    std::vector<std::pair<std::string, bool>> checks;
    auto near = [](double a, double b) { return std::abs(a - b) <= kExact; };
    checks.emplace_back("terminal target = r",
                        near(double_dqn_target(-0.25, Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4), true, 0.9), -0.25));
    // argmax of Q(s') is index 0; evaluated by the target net: -0.5 + 0.9 * -0.3
    checks.emplace_back("double DQN target = -0.77",
                        near(double_dqn_target(-0.5, Eigen::Vector2d(0.2, -0.1), Eigen::Vector2d(-0.3, 0.4), false,
                                               0.9),
                             -0.5 + 0.9 * -0.3));
    const Eigen::Vector3d q(0.1, 0.6, -0.2);
    checks.emplace_back("Q = Q' reduces to max target",
                        near(double_dqn_target(-0.1, q, q, false, 0.9), -0.1 + 0.9 * 0.6));
    checks.emplace_back("margin [1,2] expert 0 = 1.8", near(margin_loss(Eigen::Vector2d(1.0, 2.0), 0, 0.8), 1.8));
    checks.emplace_back("margin dominant expert = 0", near(margin_loss(Eigen::Vector2d(3.0, 1.0), 0, 0.8), 0.0));
    checks.emplace_back("margin single candidate = 0",
                        near(margin_loss(Eigen::VectorXd::Constant(1, 4.0), 0, 0.8), 0.0));

    // target network outputs between syncs, bit for bit
    TrainerConfig cfg;
    std::mt19937_64 g(606);
    Rng rng(607);
    Learner learner(cfg, QNet::make(cfg.dims(), rng));
    ReplayBuffer buffer(1000, cfg.per_alpha);
    for (auto& t : testing::random_transitions(g, 200))
        buffer.add(t);
    const auto probe = testing::random_state(g, 8);
    Eigen::VectorXd frozen = q_forward(learner.target(), *probe);
    bool bit_identical = true, synced = true;
    const std::size_t steps = 2 * cfg.target_sync + 100;
    for (std::size_t s = 1; s <= steps; ++s) {
        learner.train_step(buffer, rng, 1.0, 0.4);
        const Eigen::VectorXd now = q_forward(learner.target(), *probe);
        if (s % cfg.target_sync == 0) {
            synced = synced && now == q_forward(learner.online(), *probe);
            frozen = now;
        } else if (std::memcmp(now.data(), frozen.data(), sizeof(double) * static_cast<std::size_t>(now.size())) !=
                   0) {
            bit_identical = false;
        }
    }
    checks.emplace_back("target frozen between syncs", bit_identical);
    checks.emplace_back("target equals online at sync", synced);

    std::size_t passed = 0;
    std::string failed;
    for (const auto& [name, ok] : checks) {
        passed += ok;
        if (!ok)
            failed += " [" + name + "]";
    }
    std::ostringstream d;
    d << passed << "/" << checks.size() << " checks (" << steps << " learner steps, sync every " << cfg.target_sync
      << ")";
    if (!failed.empty())
        d << "; failed:" << failed;
    return {passed == checks.size(), d.str()};
}

Result reward_bookkeeping(WitnessLog& wl)
{
    std::mt19937_64 g(707);
    std::size_t runs = 0, records = 0, in_range = 0, matched = 0, exhaustive = 0, exhaustive_ok = 0;
    auto audit = [&](const SearchRun& run) {
        const auto rewards = record_delayed_rewards(run.events);
        const auto recount = testing::recount_subtree_splits(run.events);
        std::map<std::uint64_t, std::size_t> unfixed;
        for (const auto& e : run.events)
            if (e.kind == SearchEvent::Kind::Node)
                unfixed[e.id] = e.unfixed;
        for (const auto& r : rewards) {
            ++records;
            in_range += r.reward >= -1.0 && r.reward < 0.0;
            const std::uint64_t actual = recount.at(r.node_id);
            const double full = std::ldexp(1.0, static_cast<int>(unfixed.at(r.node_id))) - 1.0;
            matched += r.actual == actual && r.reward == -static_cast<double>(actual) / full;
            if (static_cast<double>(actual) == full) {
                ++exhaustive;
                exhaustive_ok += r.reward == -1.0;
            }
        }
    };
    const StrategyKind kinds[] = {StrategyKind::SoI, StrategyKind::Polarity, StrategyKind::PseudoImpact,
                                  StrategyKind::BaBSR};
    for (int i = 0; i < 48; ++i) {
        const Instance inst = testing::hard_instance(g, {4, 10, 10, 1}, "r" + std::to_string(i));
        const SearchRun run = run_search(*inst.net, inst.query, Strategy::of(kinds[i % 4]), Budget{});
        if (run.verdict.outcome == Outcome::Sat)
            wl.add(inst.net, inst.query, run.verdict.witness, inst.id);
        audit(run);
        ++runs;
    }
    // two exhaustive runs of the toy, where whole subtrees are enumerated
    SearchOptions exhaustive_opt;
    exhaustive_opt.lp_tightening = false;
    exhaustive_opt.stop_at_sat = false;
    const Network toy = toy_network();
    for (const auto& prefix : {std::vector<SplitAction>{{{0, 1}, Phase::Inactive}, {{0, 0}, Phase::Inactive}},
                               std::vector<SplitAction>{{{0, 0}, Phase::Inactive}, {{0, 1}, Phase::Inactive}}}) {
        exhaustive_opt.forced_prefix = prefix;
        audit(run_search(toy, toy_query(-0.5), Strategy::of(StrategyKind::Polarity), Budget{}, exhaustive_opt));
        ++runs;
    }
    std::ostringstream d;
    d << runs << " runs, " << records << " rewards: " << in_range << " in [-1,0), " << matched
      << " match the recount, " << exhaustive_ok << "/" << exhaustive << " exhaustive subtrees at -1";
    const bool ok = runs == 50 && records > 0 && in_range == records && matched == records && exhaustive > 0 &&
                    exhaustive_ok == exhaustive;
    return {ok, d.str()};
}

Result imitation()
{
    const auto start = Clock::now();
    // fixed demonstration set: one demonstrator, every fifth query held out
    const StrategyKind expert = StrategyKind::BaBSR;
    TrainerConfig cfg;
    cfg.finetune_epochs = 0;
    cfg.episode_max_iterations = 400;
    std::mt19937_64 g(42);
    DemoSet train_set, held_out;
    for (int i = 0; i < 40; ++i) {
        const Instance inst = testing::hard_instance(g, {5, 14, 14, 1}, "d" + std::to_string(i));
        const RecordedRun r = record_heuristic_run(inst, expert, cfg);
        auto ts = build_transitions(r.decisions, record_delayed_rewards(r.run.events), true);
        auto& dst = i % 5 == 4 ? held_out : train_set;
        dst.transitions.insert(dst.transitions.end(), ts.begin(), ts.end());
    }
    const TrainResult trained = train(cfg, train_set, {});
    std::size_t agree = 0;
    for (const auto& t : held_out.transitions)
        agree += argmax_first(q_forward(trained.net, *t.state)) == t.action;
    const double rate = held_out.transitions.empty()
                            ? 0.0
                            : static_cast<double>(agree) / static_cast<double>(held_out.transitions.size());
    std::ostringstream d;
    d << "agreement with " << to_string(expert) << " on " << held_out.transitions.size() << " held-out states "
      << std::fixed << std::setprecision(3) << rate << " (threshold " << kImitationMin << "; "
      << train_set.transitions.size() << " training states, " << trained.loss_trace.size() << " steps); runtime "
      << std::setprecision(1) << seconds_since(start) << " s";
    return {rate >= kImitationMin && trained.loss_trace.size() == 5000, d.str()};
}

Result end_to_end(WitnessLog& wl, const fs::path& work)
{
    const auto start = Clock::now();
    harness::GenSpec spec;
    spec.count = 100;
    spec.min_inputs = 4;
    spec.max_inputs = 5;
    spec.min_relus = spec.max_relus = 20;
    const harness::GeneratedSuite suite = harness::gen_random_suite(909, spec);
    const std::size_t n_train = suite.instances.size() / 20;
    const std::vector<Instance> train_queries(suite.instances.begin(),
                                              suite.instances.begin() + static_cast<std::ptrdiff_t>(n_train));

    TrainerConfig cfg;
    cfg.seed = 909;
    cfg.checkpoint_dir = (work / "checkpoints").string();
    fs::remove_all(cfg.checkpoint_dir);
    const DemoSet demos = collect_demonstrations(train_queries, cfg);
    const TrainResult trained = train(cfg, demos, train_queries);
    const double train_s = seconds_since(start);

    std::vector<harness::SuiteQuery> eval;
    for (std::size_t i = n_train; i < suite.instances.size(); ++i)
        eval.push_back({suite.instances[i].id, suite.instances[i], ""});
    Budget budget;
    budget.timeout = std::chrono::milliseconds(60'000);
    std::vector<StrategyKind> kinds(std::begin(kStaticStrategies), std::end(kStaticStrategies));
    kinds.push_back(StrategyKind::Agent);
    const auto records = harness::run_jobs(eval, kinds, budget, 1, true, trained.checkpoints.back(),
                                           (work / "results.csv").string());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].verdict == Outcome::Sat) {
            const Instance& inst = *eval[i / kinds.size()].instance;
            wl.add(inst.net, inst.query, records[i].witness, inst.id + "/" + records[i].strategy);
        }

    const auto rows = harness::aggregate(records, static_cast<double>(budget.timeout.count()));
    const auto common = harness::common_solved_iterations(records);
    std::string best;
    for (const auto& [name, it] : common.avg_iterations)
        if (name != "agent" && (best.empty() || it < common.avg_iterations.at(best)))
            best = name;
    std::size_t best_solved = 0, agent_solved = 0;
    for (const auto& r : rows) {
        if (r.strategy == best)
            best_solved = r.solved();
        if (r.strategy == "agent")
            agent_solved = r.solved();
    }
    const double agent_it = common.avg_iterations.at("agent");
    const double best_it = common.avg_iterations.at(best);
    const bool ok = common.queries > 0 && agent_it <= kTrendRatio * best_it &&
                    agent_solved + kTrendSolvedSlack >= best_solved && trained.loss_trace.size() == 45'000;

    for (const auto& r : rows)
        std::cout << "    " << std::left << std::setw(14) << r.strategy << std::right << " SAT " << r.sat << " UNSAT "
                  << r.unsat << " TIMEOUT " << r.timeout << " ERROR " << r.error << " avg_ms " << std::fixed
                  << std::setprecision(1) << r.avg_time_ms << " avg_iters " << r.avg_iterations
                  << " common_solved_iters " << common.avg_iterations.at(r.strategy) << "\n";
    std::ostringstream d;
    d << "agent " << std::fixed << std::setprecision(2) << agent_it << " avg iterations vs best static " << best << " "
      << best_it << " (ratio " << std::setprecision(3) << agent_it / best_it << ", limit " << kTrendRatio
      << ") over " << common.queries << " commonly solved; solved " << agent_solved << " vs " << best_solved
      << "; " << trained.loss_trace.size() << " steps, " << demos.transitions.size() << " demo and "
      << trained.self_transitions << " self-play transitions; training " << std::setprecision(0) << train_s
      << " s, total " << seconds_since(start) << " s";
    return {ok, d.str()};
}

Result determinism(WitnessLog& wl)
{
    std::mt19937_64 g(1010);
    std::vector<Instance> queries;
    for (int i = 0; i < 8; ++i)
        queries.push_back(testing::hard_instance(g, {4, 10, 10, 1}, "det" + std::to_string(i)));
    const auto qnet = fresh_qnet(1011);

    std::size_t runs = 0, same = 0;
    for (const auto& inst : queries) {
        std::vector<Strategy> strategies;
        for (StrategyKind k : kStaticStrategies)
            strategies.push_back(Strategy::of(k));
        strategies.push_back(make_agent_strategy(qnet));
        for (const auto& s : strategies) {
            Budget b;
            b.seed = 17;
            const SearchRun a = run_search(*inst.net, inst.query, s, b);
            const SearchRun c = run_search(*inst.net, inst.query, s, b);
            ++runs;
            same += a.verdict.outcome == c.verdict.outcome && a.verdict.iterations == c.verdict.iterations &&
                    a.verdict.splits == c.verdict.splits && a.split_sequence == c.split_sequence;
            if (a.verdict.outcome == Outcome::Sat)
                wl.add(inst.net, inst.query, a.verdict.witness, inst.id + "/determinism");
        }
    }

    TrainerConfig cfg;
    cfg.demo_epochs = 1;
    cfg.demo_steps = 300;
    cfg.finetune_epochs = 1;
    cfg.finetune_steps = 300;
    cfg.seed = 1012;
    const std::vector<Instance> train_queries(queries.begin(), queries.begin() + 4);
    const DemoSet demos_a = collect_demonstrations(train_queries, cfg);
    const DemoSet demos_b = collect_demonstrations(train_queries, cfg);
    const TrainResult ta = train(cfg, demos_a, train_queries);
    const TrainResult tb = train(cfg, demos_b, train_queries);
    bool same_trace = ta.loss_trace.size() == tb.loss_trace.size() && !ta.loss_trace.empty();
    for (std::size_t i = 0; same_trace && i < ta.loss_trace.size(); ++i)
        same_trace = ta.loss_trace[i].total == tb.loss_trace[i].total && ta.loss_trace[i].td == tb.loss_trace[i].td &&
                     ta.loss_trace[i].margin == tb.loss_trace[i].margin;
    bool same_weights = true;
    for (std::size_t k = 0; k < ta.net.layers.size(); ++k)
        same_weights = same_weights && ta.net.layers[k].w == tb.net.layers[k].w && ta.net.layers[k].b == tb.net.layers[k].b;

    std::ostringstream d;
    d << same << "/" << runs << " verify runs reproduced (verdict, iterations, split sequence); loss trace of "
      << ta.loss_trace.size() << " steps " << (same_trace ? "identical" : "differs") << ", final weights "
      << (same_weights ? "identical" : "differ");
    return {same == runs && same_trace && same_weights, d.str()};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks, one PASS/FAIL line per criterion"};
    std::vector<int> only;
    std::string work_dir = (fs::temp_directory_path() / "babrl_acceptance").string();
    app.add_option("--only", only, "run just these criteria (3 audits the witnesses the others collect)");
    app.add_option("--work", work_dir, "scratch directory for checkpoints and result CSVs")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected(only.begin(), only.end());
    const auto want = [&](int c) { return selected.empty() || selected.count(c) > 0; };
    fs::create_directories(work_dir);

    WitnessLog witnesses;
    std::map<int, Result> results;
    const std::vector<std::pair<int, std::function<Result()>>> plan{
        {1, [&] { return running_example(witnesses); }},
        {2, [&] { return oracle_equivalence(witnesses); }},
        {4, [&] { return formula_suite(); }},
        {5, [&] { return gradient_check_suite(); }},
        {6, [&] { return target_and_margin(); }},
        {7, [&] { return reward_bookkeeping(witnesses); }},
        {8, [&] { return imitation(); }},
        {9, [&] { return end_to_end(witnesses, work_dir); }},
        {10, [&] { return determinism(witnesses); }},
        {3, [&] { return witness_soundness(witnesses); }},
    };
    for (const auto& [id, run] : plan) {
        if (!want(id))
            continue;
        try {
            results[id] = run();
        } catch (const std::exception& e) {
            results[id] = {false, std::string("exception: ") + e.what()};
        }
        std::cerr << "criterion " << id << " done\n";
    }

    bool all = true;
    for (const auto& [id, r] : results) {
        std::cout << "criterion " << std::setw(2) << id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail
                  << "\n";
        all = all && r.pass;
    }
    return all ? 0 : 1;
}
