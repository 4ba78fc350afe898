#include "babrl/agent/trainer.hpp"

#include "babrl/agent/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

namespace babrl::agent {

std::vector<int> TrainerConfig::dims() const
{
    std::vector<int> d{kFeatureWidth};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(1);
    return d;
}

std::vector<Transition> build_transitions(const std::vector<Decision>& decisions,
                                          const std::vector<RewardRecord>& rewards, bool is_demo)
{
    std::map<std::uint64_t, double> by_node;
    for (const auto& r : rewards)
        by_node[r.node_id] = r.reward;
    std::vector<Transition> out;
    out.reserve(decisions.size());
    for (std::size_t j = 0; j < decisions.size(); ++j) {
        const auto it = by_node.find(decisions[j].node_id);
        if (it == by_node.end())
            throw TrainingError("decision at node " + std::to_string(decisions[j].node_id) + " has no reward");
        Transition t;
        t.state = decisions[j].state;
        t.action = decisions[j].action;
        t.reward = it->second;
        t.terminal = j + 1 == decisions.size();
        if (!t.terminal)
            t.next = decisions[j + 1].state;
        t.is_demo = is_demo;
        out.push_back(std::move(t));
    }
    return out;
}

AgentPolicy::AgentPolicy(std::shared_ptr<const QNet> net, double epsilon, std::vector<Decision>* record)
    : net_(std::move(net)), epsilon_(epsilon), record_(record)
{
    if (!net_)
        throw std::invalid_argument("AgentPolicy needs a network");
    if (net_->input_dim() != kFeatureWidth)
        throw std::invalid_argument("AgentPolicy: network input width does not match the feature layout");
}

void AgentPolicy::start(const Network& net, const NodeState& root)
{
    ctx_ = FeatureContext::from_root(net, root);
}

SplitAction AgentPolicy::choose(const Network& net, const NodeState& node, const HeuristicScores& scores, Rng& rng)
{
    if (!ctx_)
        throw std::logic_error("AgentPolicy::choose before start");
    auto f = std::make_shared<StateFeatures>(featurize(net, *ctx_, node, scores));
    const Eigen::Index a = act(*net_, *f, epsilon_, rng);
    const SplitAction chosen = f->candidates[static_cast<std::size_t>(a)];
    if (record_)
        record_->push_back({node.id, std::move(f), a});
    return chosen;
}

Strategy make_agent_strategy(std::shared_ptr<const QNet> net, double epsilon, std::vector<Decision>* record)
{
    return {StrategyKind::Agent, std::make_shared<AgentPolicy>(std::move(net), epsilon, record)};
}

LossComponents batch_loss(const QNet& online, const QNet& target, const std::vector<const Transition*>& batch,
                          const std::vector<double>& weights, double lambda, const TrainerConfig& config, QNet* grad,
                          std::vector<double>* td_errors)
{
    Eigen::Index cols = 0;
    for (const Transition* t : batch)
        cols += t->state->size();
    Eigen::MatrixXd x(kFeatureWidth, cols);
    std::vector<Eigen::Index> offset;
    offset.reserve(batch.size());
    Eigen::Index at = 0;
    for (const Transition* t : batch) {
        offset.push_back(at);
        x.middleCols(at, t->state->size()) = t->state->x;
        at += t->state->size();
    }

    ForwardCache<double> cache;
    const Eigen::VectorXd q = q_forward(online, x, grad ? &cache : nullptr);
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(cols);
    LossComponents loss;
    if (td_errors)
        td_errors->assign(batch.size(), 0.0);

    for (std::size_t j = 0; j < batch.size(); ++j) {
        const Transition& t = *batch[j];
        const Eigen::Index n = t.state->size();
        const Eigen::VectorXd qj = q.segment(offset[j], n);
        const double y = double_dqn_target(t.reward, t.next.get(), t.terminal, online, target, config.gamma);
        const double td = qj[t.action] - y;
        loss.td += weights[j] * td * td;
        dq[offset[j] + t.action] += 2.0 * weights[j] * td;
        if (td_errors)
            (*td_errors)[j] = td;
        if (t.is_demo && lambda > 0.0) {
            loss.margin += margin_loss(qj, t.action, config.margin);
            dq.segment(offset[j], n) += lambda * margin_loss_gradient(qj, t.action, config.margin);
        }
    }
    loss.total = loss.td + lambda * loss.margin;
    if (grad)
        q_backward(online, cache, dq, *grad);
    return loss;
}

Learner::Learner(const TrainerConfig& config, QNet init)
    : config_(config), online_(std::make_shared<QNet>(std::move(init))), target_(*online_),
      adam_(*online_, config.learning_rate)
{
}

LossComponents Learner::train_step(ReplayBuffer& buffer, Rng& rng, double lambda, double beta)
{
    const SampledBatch b = sample_prioritized(buffer, config_.batch_size, config_.per_alpha, beta, rng);
    std::vector<const Transition*> batch;
    batch.reserve(b.indices.size());
    for (std::size_t i : b.indices)
        batch.push_back(&buffer[i]);

    QNet grad = online_->zeros_like();
    std::vector<double> td;
    const LossComponents loss = batch_loss(*online_, target_, batch, b.weights, lambda, config_, &grad, &td);
    bool finite = std::isfinite(loss.total);
    grad.for_each_block([&](const double* p, Eigen::Index n) {
        finite = finite && Eigen::Map<const Eigen::VectorXd>(p, n).allFinite();
    });
    if (!finite) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << steps_ << ": td=" << loss.td << " margin=" << loss.margin
            << " lambda=" << lambda << " batch=" << batch.size();
        throw TrainingError(msg.str());
    }
    adam_.step(*online_, grad);
    for (std::size_t k = 0; k < b.indices.size(); ++k)
        buffer.update_priority(b.indices[k], std::abs(td[k]) + config_.per_epsilon);
    ++steps_;
    if (config_.target_sync > 0 && steps_ % config_.target_sync == 0)
        target_ = *online_;
    return loss;
}

RecordedRun record_heuristic_run(const Instance& inst, StrategyKind kind, const TrainerConfig& config)
{
    RecordedRun out;
    std::optional<FeatureContext> ctx;
    SearchOptions opt;
    opt.lp_tightening = config.lp_tightening;
    opt.on_decision = [&](const DecisionRecord& d) {
        if (d.initial_policy || d.forced)
            return;
        if (!ctx)
            ctx = FeatureContext::from_root(*inst.net, d.root);
        auto f = std::make_shared<StateFeatures>(featurize(*inst.net, *ctx, d.node, d.scores));
        const Eigen::Index a = f->index_of(d.action);
        out.decisions.push_back({d.node.id, std::move(f), a});
    };
    Budget b{config.episode_timeout, config.episode_max_iterations, config.seed};
    out.run = run_search(*inst.net, inst.query, Strategy::of(kind), b, opt);
    return out;
}

DemoSet collect_demonstrations(const std::vector<Instance>& queries, const TrainerConfig& config)
{
    DemoSet demos;
    for (const Instance& inst : queries) {
        std::optional<RecordedRun> best;
        std::optional<StrategyKind> expert;
        for (StrategyKind k : kStaticStrategies) {
            RecordedRun r = record_heuristic_run(inst, k, config);
            const Outcome o = r.run.verdict.outcome;
            if (o != Outcome::Sat && o != Outcome::Unsat)
                continue;
            if (!best || r.run.verdict.iterations < best->run.verdict.iterations) {
                best = std::move(r);
                expert = k;
            }
        }
        demos.experts.push_back(expert);
        if (!best)
            continue;
        auto t = build_transitions(best->decisions, record_delayed_rewards(best->run.events), true);
        demos.transitions.insert(demos.transitions.end(), t.begin(), t.end());
    }
    return demos;
}

namespace {

class CheckpointSink {
public:
    CheckpointSink(const TrainerConfig& config, TrainResult& result) : config_(config), result_(result) {}

    void write(const Learner& learner, const std::string& label)
    {
        if (config_.checkpoint_dir.empty())
            return;
        std::filesystem::create_directories(config_.checkpoint_dir);
        const std::string path = (std::filesystem::path(config_.checkpoint_dir) / (label + ".json")).string();
        save_checkpoint(path, Checkpoint{learner.online(), config_, learner.steps(), label});
        result_.checkpoints.push_back(path);
    }

private:
    const TrainerConfig& config_;
    TrainResult& result_;
};

std::string epoch_label(std::size_t epoch)
{
    std::ostringstream s;
    s << "epoch_" << (epoch < 10 ? "0" : "") << epoch;
    return s.str();
}

} // namespace

TrainResult train(const TrainerConfig& config, const DemoSet& demos, const std::vector<Instance>& train_queries,
                  const std::function<void(const std::string&)>& log)
{
    if (demos.transitions.empty())
        throw TrainingError("train: the demonstration set is empty");
    const std::size_t phase2 = config.finetune_epochs * config.finetune_steps;
    if (phase2 > 0 && train_queries.empty())
        throw TrainingError("train: self-play needs at least one training query");

    Rng init_rng(config.seed);
    Learner learner(config, QNet::make(config.dims(), init_rng));
    ReplayBuffer buffer(config.buffer_capacity, config.per_alpha);
    for (const Transition& t : demos.transitions)
        buffer.add(t);

    TrainResult result;
    result.demo_transitions = demos.transitions.size();
    CheckpointSink sink(config, result);
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const double total = static_cast<double>(std::max<std::size_t>(config.total_steps(), 2) - 1);
    const auto beta = [&] {
        const double frac = std::min(1.0, static_cast<double>(learner.steps()) / total);
        return config.per_beta_start + (config.per_beta_end - config.per_beta_start) * frac;
    };
    const auto report = [&](std::size_t epoch, std::size_t steps) {
        if (!log || steps == 0)
            return;
        double sum = 0.0;
        for (std::size_t i = result.loss_trace.size() - steps; i < result.loss_trace.size(); ++i)
            sum += result.loss_trace[i].total;
        std::ostringstream s;
        s << "epoch " << epoch << " mean loss " << sum / static_cast<double>(steps) << " buffer " << buffer.size();
        log(s.str());
    };

    std::size_t epoch = 0;
    for (std::size_t e = 0; e < config.demo_epochs; ++e) {
        for (std::size_t s = 0; s < config.demo_steps; ++s)
            result.loss_trace.push_back(learner.train_step(buffer, rng, config.lambda_start, beta()));
        report(++epoch, config.demo_steps);
        sink.write(learner, epoch_label(epoch));
    }

    std::size_t t2 = 0;
    std::size_t cursor = 0;
    std::size_t idle = 0;
    while (t2 < phase2) {
        const Instance& inst = train_queries[cursor++ % train_queries.size()];
        std::vector<Decision> decisions;
        const Strategy strategy =
            make_agent_strategy(learner.online_ptr(), epsilon_schedule(result.episodes), &decisions);
        SearchOptions opt;
        opt.lp_tightening = config.lp_tightening;
        Budget b{config.episode_timeout, config.episode_max_iterations, config.seed + 1 + result.episodes};
        const SearchRun run = run_search(*inst.net, inst.query, strategy, b, opt);
        ++result.episodes;
        if (decisions.empty()) {
            if (++idle >= train_queries.size())
                throw TrainingError("train: a full pass of self-play made no agent decision");
            continue;
        }
        idle = 0;
        for (Transition& t : build_transitions(decisions, record_delayed_rewards(run.events), false))
            buffer.add(std::move(t));
        result.self_transitions += decisions.size();

        for (std::size_t k = 0; k < decisions.size() && t2 < phase2; ++k) {
            const double lambda =
                config.lambda_start * (1.0 - static_cast<double>(t2) / static_cast<double>(phase2));
            result.loss_trace.push_back(learner.train_step(buffer, rng, lambda, beta()));
            ++t2;
            if (t2 % config.finetune_steps == 0) {
                report(++epoch, config.finetune_steps);
                sink.write(learner, epoch_label(epoch));
            }
        }
    }
    sink.write(learner, "final");
    result.net = learner.online();
    return result;
}

} // namespace babrl::agent
